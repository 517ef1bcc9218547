//! Procedural two-domain segmentation datasets.
//!
//! Region maps come from seeded Voronoi partitions: a handful of cell
//! centers per image, each assigned a class by weighted choice, with the
//! label of a pixel being the class of its nearest center. That yields
//! contiguous class regions resembling segmentation masks while the cell
//! weights control expected class ratios.
//!
//! The source domain draws per-class colors plus Gaussian texture noise;
//! the target domain applies the spec'd shift: a color offset, a noise
//! sigma change, and a reweighting of class ratios (label shift). Target
//! labels are generated too but carry an eval-only flag in spirit: the
//! trainer never reads them during adaptation.

use crate::divergence::SampleSets;
use crate::error::{Error, Result};
use crate::losses::Domain;
use crate::numkit::rng::{derive, Rng};
use crate::numkit::Tensor;
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

/// Generation parameters for one source/target domain pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DomainSpec {
    /// Class count K.
    pub classes: usize,
    pub height: usize,
    pub width: usize,
    /// Voronoi cell centers per image.
    pub cells_per_image: usize,
    /// Per-class mean color, length K.
    pub class_colors: Vec<[f64; 3]>,
    /// Texture noise sigma (source).
    pub noise_sigma: f64,
    /// Expected pixel fraction per class (source); sums to 1.
    pub class_ratios: Vec<f64>,
    /// Added to every pixel of every target image.
    pub appearance_offset: [f64; 3],
    /// Added to the noise sigma for target images.
    pub noise_sigma_shift: f64,
    /// Multiplicative reweighting of class ratios for the target
    /// (renormalized); all ones means no label shift.
    pub ratio_reweight: Vec<f64>,
}

impl Default for DomainSpec {
    fn default() -> Self {
        DomainSpec {
            classes: 4,
            height: 32,
            width: 32,
            cells_per_image: 14,
            class_colors: vec![
                [0.25, 0.25, 0.30],
                [0.75, 0.30, 0.35],
                [0.30, 0.75, 0.40],
                [0.70, 0.70, 0.45],
            ],
            noise_sigma: 0.10,
            class_ratios: vec![0.25; 4],
            appearance_offset: [0.0, 0.0, 0.0],
            noise_sigma_shift: 0.0,
            ratio_reweight: vec![1.0; 4],
        }
    }
}

impl DomainSpec {
    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 {
            return Err(Error::config("classes must be at least 2"));
        }
        if self.height == 0 || self.width == 0 || self.cells_per_image == 0 {
            return Err(Error::config("image and cell sizes must be positive"));
        }
        if self.class_colors.len() != self.classes
            || self.class_ratios.len() != self.classes
            || self.ratio_reweight.len() != self.classes
        {
            return Err(Error::config(
                "class_colors, class_ratios and ratio_reweight must have K entries",
            ));
        }
        let sum: f64 = self.class_ratios.iter().sum();
        if (sum - 1.0).abs() > 1e-9 || self.class_ratios.iter().any(|&r| r < 0.0) {
            return Err(Error::config("class_ratios must be non-negative and sum to 1"));
        }
        if self.noise_sigma <= 0.0 || self.noise_sigma + self.noise_sigma_shift <= 0.0 {
            return Err(Error::config("noise sigma must stay positive"));
        }
        if self.ratio_reweight.iter().any(|&w| w < 0.0)
            || self.ratio_reweight.iter().sum::<f64>() == 0.0
        {
            return Err(Error::config("ratio_reweight must be non-negative, not all zero"));
        }
        Ok(())
    }

    /// Class weights used when drawing target cells.
    pub fn target_ratios(&self) -> Vec<f64> {
        let raw: Vec<f64> = self
            .class_ratios
            .iter()
            .zip(&self.ratio_reweight)
            .map(|(r, w)| r * w)
            .collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|r| r / total).collect()
    }
}

/// One image with its one-hot label and domain tag.
#[derive(Clone, Debug)]
pub struct SamplePair {
    /// [3, H, W]
    pub image: Tensor,
    /// [K, H, W] one-hot. For target samples this is generation-time truth,
    /// used for evaluation only.
    pub label: Tensor,
    pub domain: Domain,
}

/// A generated dataset plus the recipe that reproduces it bit-exactly.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub spec: DomainSpec,
    pub seed: u64,
    pub domain: Domain,
    pub samples: Vec<SamplePair>,
}

fn generate_sample(spec: &DomainSpec, domain: Domain, sample_seed: u64) -> SamplePair {
    let mut rng = Rng::new(sample_seed);
    let (h, w, k) = (spec.height, spec.width, spec.classes);
    let hw = h * w;

    let ratios = match domain {
        Domain::Source => spec.class_ratios.clone(),
        Domain::Target => spec.target_ratios(),
    };
    // cell centers and their classes
    let mut centers = Vec::with_capacity(spec.cells_per_image);
    for _ in 0..spec.cells_per_image {
        let cy = rng.uniform_in(0.0, h as f64);
        let cx = rng.uniform_in(0.0, w as f64);
        let class = rng.weighted_index(&ratios);
        centers.push((cy, cx, class));
    }

    // labels: nearest center, ties by lowest cell index
    let mut label = vec![0.0f64; k * hw];
    let mut class_of = vec![0usize; hw];
    for y in 0..h {
        for x in 0..w {
            let (mut best_d, mut best_c) = (f64::INFINITY, 0usize);
            for &(cy, cx, class) in &centers {
                let d = (y as f64 - cy).powi(2) + (x as f64 - cx).powi(2);
                if d < best_d {
                    best_d = d;
                    best_c = class;
                }
            }
            class_of[y * w + x] = best_c;
            label[best_c * hw + y * w + x] = 1.0;
        }
    }

    let (offset, sigma) = match domain {
        Domain::Source => ([0.0; 3], spec.noise_sigma),
        Domain::Target => (
            spec.appearance_offset,
            spec.noise_sigma + spec.noise_sigma_shift,
        ),
    };
    let mut image = vec![0.0f64; 3 * hw];
    for pix in 0..hw {
        let color = &spec.class_colors[class_of[pix]];
        for ch in 0..3 {
            image[ch * hw + pix] = color[ch] + offset[ch] + sigma * rng.normal();
        }
    }

    SamplePair {
        image: Tensor::new(vec![3, h, w], image).expect("finite by construction"),
        label: Tensor::new(vec![k, h, w], label).expect("one-hot by construction"),
        domain,
    }
}

fn generate_dataset(spec: &DomainSpec, domain: Domain, n: usize, seed: u64) -> Dataset {
    let domain_stream = match domain {
        Domain::Source => 0x5000_0000u64,
        Domain::Target => 0x7000_0000u64,
    };
    let samples = (0..n)
        .map(|i| generate_sample(spec, domain, derive(derive(seed, domain_stream), i as u64)))
        .collect();
    Dataset {
        spec: spec.clone(),
        seed,
        domain,
        samples,
    }
}

/// Generates the source and target datasets of a domain pair.
pub fn generate_domain_pair(
    spec: &DomainSpec,
    n_source: usize,
    n_target: usize,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    spec.validate()?;
    if n_source == 0 || n_target == 0 {
        return Err(Error::config("sample counts must be at least 1"));
    }
    Ok((
        generate_dataset(spec, Domain::Source, n_source, seed),
        generate_dataset(spec, Domain::Target, n_target, seed),
    ))
}

/// An extra target-distribution dataset drawn from an independent stream,
/// for held-out evaluation.
pub fn generate_target_eval(spec: &DomainSpec, n: usize, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::config("sample counts must be at least 1"));
    }
    Ok(generate_dataset(spec, Domain::Target, n, derive(seed, 0xE7A1)))
}

// ---- label remapping ----------------------------------------------------

/// Surjective map from raw class ids to group ids.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelMap {
    /// `map[raw_id] = group_id`
    pub map: Vec<usize>,
    pub groups: usize,
}

impl LabelMap {
    pub fn identity(k: usize) -> Self {
        LabelMap {
            map: (0..k).collect(),
            groups: k,
        }
    }

    pub fn new(map: Vec<usize>) -> Result<Self> {
        if map.is_empty() {
            return Err(Error::config("label map must cover at least one class"));
        }
        let groups = map.iter().max().unwrap() + 1;
        for g in 0..groups {
            if !map.contains(&g) {
                return Err(Error::config(format!(
                    "group ids must be contiguous from 0; {g} is unused"
                )));
            }
        }
        Ok(LabelMap { map, groups })
    }
}

/// Regroups a one-hot label tensor [K×H×W] into [K'×H×W]; pixel counts are
/// conserved because every raw class lands in exactly one group.
pub fn remap_labels(y: &Tensor, map: &LabelMap) -> Result<Tensor> {
    let s = y.shape();
    if s.len() != 3 {
        return Err(Error::shape("remap_labels expects [K,H,W]"));
    }
    let (k, h, w) = (s[0], s[1], s[2]);
    if map.map.len() != k {
        return Err(Error::contract(format!(
            "label map covers {} raw ids, tensor has {k}",
            map.map.len()
        )));
    }
    let hw = h * w;
    let mut out = vec![0.0f64; map.groups * hw];
    let data = y.data();
    for c in 0..k {
        let group = map.map[c];
        for pix in 0..hw {
            if data[c * hw + pix] == 1.0 {
                out[group * hw + pix] = 1.0;
            }
        }
    }
    Tensor::new(vec![map.groups, h, w], out)
}

// ---- disk format ----------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct Manifest {
    version: u32,
    count: usize,
    seed: u64,
    domain: Domain,
    spec: DomainSpec,
}

/// Writes `manifest.json` plus `img_%06d.calt` / `lbl_%06d.calt` pairs.
pub fn write_dataset(ds: &Dataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let manifest = Manifest {
        version: 1,
        count: ds.samples.len(),
        seed: ds.seed,
        domain: ds.domain,
        spec: ds.spec.clone(),
    };
    let mut f = BufWriter::new(fs::File::create(dir.join("manifest.json"))?);
    serde_json::to_writer_pretty(&mut f, &manifest)?;
    f.write_all(b"\n")?;
    for (i, s) in ds.samples.iter().enumerate() {
        let mut img = BufWriter::new(fs::File::create(dir.join(format!("img_{i:06}.calt")))?);
        s.image.write_calt(&mut img)?;
        let mut lbl = BufWriter::new(fs::File::create(dir.join(format!("lbl_{i:06}.calt")))?);
        s.label.write_calt(&mut lbl)?;
    }
    Ok(())
}

pub fn read_dataset(dir: &Path) -> Result<Dataset> {
    let manifest_path = dir.join("manifest.json");
    let mut text = String::new();
    fs::File::open(&manifest_path)?.read_to_string(&mut text)?;
    let manifest: Manifest = serde_json::from_str(&text)?;
    if manifest.version != 1 {
        return Err(Error::format(0, format!("unsupported manifest version {}", manifest.version)));
    }
    manifest.spec.validate()?;
    let mut samples = Vec::with_capacity(manifest.count);
    for i in 0..manifest.count {
        let img_path = dir.join(format!("img_{i:06}.calt"));
        if !img_path.exists() {
            return Err(Error::format(
                0,
                format!("manifest promises {} samples but {img_path:?} is missing", manifest.count),
            ));
        }
        let mut img = BufReader::new(fs::File::open(&img_path)?);
        let image = Tensor::read_calt(&mut img)?;
        let mut lbl = BufReader::new(fs::File::open(dir.join(format!("lbl_{i:06}.calt")))?);
        let label = Tensor::read_calt(&mut lbl)?;
        samples.push(SamplePair {
            image,
            label,
            domain: manifest.domain,
        });
    }
    Ok(Dataset {
        spec: manifest.spec,
        seed: manifest.seed,
        domain: manifest.domain,
        samples,
    })
}

// ---- divergence hooks -------------------------------------------------------

/// Draws per-pixel color vectors from both datasets as divergence samples.
pub fn pixel_feature_sets(
    source: &Dataset,
    target: &Dataset,
    pixels_per_image: usize,
    seed: u64,
) -> Result<SampleSets> {
    let mut rng = Rng::new(derive(seed, 0xF0));
    let mut collect = |ds: &Dataset| -> Vec<Vec<f64>> {
        let mut out = Vec::new();
        for s in &ds.samples {
            let hw = s.image.shape()[1] * s.image.shape()[2];
            for _ in 0..pixels_per_image {
                let pix = rng.index(hw);
                out.push((0..3).map(|ch| s.image.data()[ch * hw + pix]).collect());
            }
        }
        out
    };
    SampleSets::new(collect(source), collect(target))
}

// ---- benchmark presets -----------------------------------------------------

/// Appearance shift only: the label distribution is identical across
/// domains, so informed mixing has clean signal.
pub fn mild_shift_spec() -> DomainSpec {
    DomainSpec {
        appearance_offset: [0.22, 0.22, 0.22],
        ..DomainSpec::default()
    }
}

/// Appearance shift plus a strong class-ratio shift. The offset drives
/// the dominant target class's appearance toward a class that is nearly
/// absent from the target, so prediction-based mixing has misleading
/// signal to work with.
pub fn hard_shift_spec() -> DomainSpec {
    DomainSpec {
        appearance_offset: [0.35, 0.35, 0.10],
        ratio_reweight: vec![3.0, 2.0, 0.5, 0.05],
        ..DomainSpec::default()
    }
}
