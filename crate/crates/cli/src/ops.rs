//! Implementations behind the subcommands, also callable in-process by
//! the acceptance suite.

use crate::config::RunConfig;
use cali_core::divergence::{divergence_report, DivergenceReport, SampleSets};
use cali_core::evalkit::{evaluate_bundle, EvalReport};
use cali_core::models::ModelBundle;
use cali_core::numkit::rng::{derive, Rng};
use cali_core::synthdata::{
    generate_domain_pair, generate_target_eval, pixel_feature_sets, read_dataset, write_dataset,
    Dataset,
};
use cali_core::trainer::{metrics_to_csv, run as run_training, Method, RunOutcome, TrainConfig};
use cali_core::{Error, Result};
use cali_nav::navsim::{
    render_segmentation, run_episode, summarize, EpisodeLog, World,
};
use cali_nav::planner::{
    edf, extract_boundary, generate_primitives, project_primitives, sedf, select_primitive,
    write_mask_pgm, write_pgm16,
};
use serde::Serialize;
use std::fs;
use std::path::Path;

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Generates the source/target/target-eval datasets under `out`.
pub fn gen_data(cfg: &RunConfig, seed: u64, out: &Path) -> Result<()> {
    let (src, tgt) = generate_domain_pair(
        &cfg.data.domain,
        cfg.data.n_source,
        cfg.data.n_target,
        seed,
    )?;
    let eval = generate_target_eval(&cfg.data.domain, cfg.data.n_target_eval, seed)?;
    write_dataset(&src, &out.join("source"))?;
    write_dataset(&tgt, &out.join("target"))?;
    write_dataset(&eval, &out.join("target_eval"))?;
    Ok(())
}

/// Datasets for a run: read from a gen-data directory, or regenerated
/// from the config and seed.
pub fn load_or_generate(
    cfg: &RunConfig,
    seed: u64,
    data_dir: Option<&Path>,
) -> Result<(Dataset, Dataset, Dataset)> {
    match data_dir {
        Some(dir) => Ok((
            read_dataset(&dir.join("source"))?,
            read_dataset(&dir.join("target"))?,
            read_dataset(&dir.join("target_eval"))?,
        )),
        None => {
            let (src, tgt) = generate_domain_pair(
                &cfg.data.domain,
                cfg.data.n_source,
                cfg.data.n_target,
                seed,
            )?;
            let eval = generate_target_eval(&cfg.data.domain, cfg.data.n_target_eval, seed)?;
            Ok((src, tgt, eval))
        }
    }
}

/// Per-run summary written next to the metrics log.
#[derive(Serialize, serde::Deserialize)]
pub struct TrainSummary {
    pub method: String,
    pub seed: u64,
    pub max_iters: u64,
    pub final_miou: f64,
    pub final_iou_per_class: Vec<Option<f64>>,
}

/// Trains one configuration and writes metrics.csv, summary.json and
/// checkpoints into `out`.
pub fn train(
    cfg: &RunConfig,
    method: Method,
    seed: u64,
    data_dir: Option<&Path>,
    out: &Path,
) -> Result<RunOutcome> {
    let (src, tgt, eval) = load_or_generate(cfg, seed, data_dir)?;
    let train_cfg = TrainConfig {
        method,
        seed,
        ..cfg.train.clone()
    };
    fs::create_dir_all(out)?;
    let outcome = run_training(
        &train_cfg,
        &cfg.arch,
        &cfg.optimizer,
        &src,
        &tgt,
        &eval.samples,
        Some(out),
    )?;
    fs::write(
        out.join("metrics.csv"),
        metrics_to_csv(&outcome.metrics, cfg.arch.classes),
    )?;
    let last = outcome.metrics.last();
    write_json(
        &out.join("summary.json"),
        &TrainSummary {
            method: method.name().to_string(),
            seed,
            max_iters: train_cfg.max_iters,
            final_miou: outcome.final_miou,
            final_iou_per_class: last.map(|r| r.iou_per_class.clone()).unwrap_or_default(),
        },
    )?;
    let mut f = std::io::BufWriter::new(fs::File::create(out.join("ckpt_final.cali"))?);
    outcome.bundle.save_checkpoint(&mut f)?;
    Ok(outcome)
}

/// Evaluates a checkpoint on a dataset directory; writes JSON and CSV.
pub fn eval(cfg: &RunConfig, checkpoint: &Path, data_dir: &Path, out: &Path) -> Result<EvalReport> {
    let mut f = std::io::BufReader::new(fs::File::open(checkpoint)?);
    let bundle = ModelBundle::load_checkpoint(&mut f, &cfg.optimizer)?;
    let ds = read_dataset(data_dir)?;
    let cm = evaluate_bundle(&bundle, &ds.samples)?;
    let report = EvalReport::from_matrix(&cm)?;
    write_json(&out.with_extension("json"), &report)?;
    fs::write(out.with_extension("csv"), report.to_csv())?;
    Ok(report)
}

/// Built-in sample-set shapes for the divergence subcommand.
pub fn divergence_sets(preset: &str, cfg: &RunConfig, seed: u64) -> Result<SampleSets> {
    let mut rng = Rng::new(derive(seed, 0xD1F));
    match preset {
        "identical" => {
            let pts: Vec<Vec<f64>> = (0..60).map(|_| vec![rng.normal(), rng.normal()]).collect();
            SampleSets::new(pts.clone(), pts)
        }
        "separated" => {
            let src: Vec<Vec<f64>> = (0..60).map(|_| vec![rng.normal() * 0.2, 0.0]).collect();
            let tgt: Vec<Vec<f64>> = (0..60)
                .map(|_| vec![9.0 + rng.normal() * 0.2, 0.0])
                .collect();
            SampleSets::new(src, tgt)
        }
        "overlapping" => SampleSets::new(
            vec![vec![0.0], vec![1.0]],
            vec![vec![1.0], vec![2.0]],
        ),
        "pixels" => {
            let (src, tgt) = generate_domain_pair(
                &cfg.data.domain,
                cfg.data.n_source.min(8),
                cfg.data.n_target.min(8),
                seed,
            )?;
            pixel_feature_sets(&src, &tgt, 250, seed)
        }
        other => Err(Error::config(format!(
            "unknown divergence preset '{other}' (identical|separated|overlapping|pixels)"
        ))),
    }
}

/// Runs the estimator, both oracles and the bound check; optionally
/// writes the JSON report.
pub fn divergence(
    preset: &str,
    cfg: &RunConfig,
    seed: u64,
    out: Option<&Path>,
) -> Result<DivergenceReport> {
    let sets = divergence_sets(preset, cfg, seed)?;
    let report = divergence_report(&sets, 500, seed)?;
    if let Some(path) = out {
        write_json(path, &report)?;
    }
    Ok(report)
}

/// Builds a world from a suite spec like `bench:3`, `gap:0`, `box`, `empty`.
pub fn parse_world(spec: &str) -> Result<World> {
    let (kind, seed) = match spec.split_once(':') {
        Some((k, s)) => (
            k,
            s.parse::<u64>()
                .map_err(|_| Error::config(format!("bad world seed in '{spec}'")))?,
        ),
        None => (spec, 0),
    };
    let world = match kind {
        "empty" => World::empty(),
        "bench" => World::benchmark(seed),
        "gap" => World::wall_gap(seed),
        "box" => World::sealed_box(),
        other => {
            return Err(Error::config(format!(
                "unknown world '{other}' (empty|bench:N|gap:N|box)"
            )))
        }
    };
    Ok(world)
}

/// One planning frame from the world's start pose: dumps the mask, the
/// raw and scaled fields, and a JSON trace of the selection.
pub fn plan(cfg: &RunConfig, world_spec: &str, out: &Path) -> Result<usize> {
    let world = parse_world(world_spec)?;
    world.validate()?;
    cfg.planner.validate()?;
    fs::create_dir_all(out)?;
    let cam = &cfg.planner.camera;
    let mask = render_segmentation(&world, &world.start, cam);
    let boundary = extract_boundary(&mask, cfg.planner.v_thres());
    let raw = edf(&boundary, cam.image_width, cam.image_height);
    let field = sedf(&raw, cfg.planner.alpha)?;
    let mut lib = generate_primitives(
        cfg.planner.n_primitives,
        cfg.planner.linear_velocity,
        cfg.planner.omega_max,
        cfg.planner.horizon,
        cfg.planner.samples_per_primitive,
    );
    project_primitives(&mut lib, cam);
    let goal_local = world.start.to_local(&world.goal);
    let (selected, costs) = select_primitive(
        &lib,
        &field,
        &goal_local,
        cfg.planner.w1,
        cfg.planner.w2,
        cfg.planner.a,
        cfg.planner.b,
        cfg.planner.literal_eq25,
    )?;
    write_mask_pgm(&mask, &out.join("mask.pgm"))?;
    write_pgm16(&field, &out.join("sedf.pgm"))?;
    #[derive(Serialize)]
    struct PlanTrace {
        world: String,
        selected: usize,
        boundary_points: usize,
        costs: Vec<cali_nav::planner::CostBreakdown>,
    }
    write_json(
        &out.join("plan.json"),
        &PlanTrace {
            world: world_spec.to_string(),
            selected,
            boundary_points: boundary.len(),
            costs,
        },
    )?;
    Ok(selected)
}

/// Runs an episode suite and writes per-episode logs plus a summary.
pub fn navigate(cfg: &RunConfig, suite: &str, out: &Path, dump: bool) -> Result<Vec<EpisodeLog>> {
    let worlds: Vec<World> = match suite {
        "bench" => (0..10).map(World::benchmark).collect(),
        "gap" => (0..10).map(World::wall_gap).collect(),
        "box" => vec![World::sealed_box()],
        "empty" => vec![World::empty()],
        other => {
            return Err(Error::config(format!(
                "unknown suite '{other}' (bench|gap|box|empty)"
            )))
        }
    };
    fs::create_dir_all(out)?;
    let mut logs = Vec::new();
    for (i, world) in worlds.iter().enumerate() {
        let dump_dir = dump.then(|| out.join(format!("dump_{i:02}")));
        let log = run_episode(world, &cfg.planner, &cfg.sim, dump_dir.as_deref())?;
        write_json(&out.join(format!("episode_{i:02}.json")), &log)?;
        logs.push(log);
    }
    write_json(&out.join("suite_summary.json"), &summarize(&logs))?;
    Ok(logs)
}

/// Aggregates training runs under a directory into one table: scans for
/// `*/summary.json` and averages final mIoU per method.
pub fn report(runs_dir: &Path, out: &Path) -> Result<String> {
    let mut entries: Vec<TrainSummary> = Vec::new();
    let mut dirs: Vec<_> = fs::read_dir(runs_dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .collect();
    dirs.sort();
    for dir in dirs {
        let summary = dir.join("summary.json");
        if summary.exists() {
            let text = fs::read_to_string(&summary)?;
            entries.push(serde_json::from_str(&text)?);
        }
    }
    if entries.is_empty() {
        return Err(Error::config(format!(
            "no run summaries found under {runs_dir:?}"
        )));
    }
    let mut methods: Vec<String> = entries.iter().map(|e| e.method.clone()).collect();
    methods.sort();
    methods.dedup();
    let mut csv = String::from("method,runs,mean_miou\n");
    let mut rows = Vec::new();
    for method in &methods {
        let vals: Vec<f64> = entries
            .iter()
            .filter(|e| &e.method == method)
            .map(|e| e.final_miou)
            .collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        csv.push_str(&format!("{method},{},{mean}\n", vals.len()));
        rows.push(serde_json::json!({
            "method": method,
            "runs": vals.len(),
            "mean_miou": mean,
        }));
    }
    if let Some(parent) = out.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(out.with_extension("csv"), &csv)?;
    write_json(&out.with_extension("json"), &rows)?;
    Ok(csv)
}
