//! Segmentation metrics and discrepancy tracking.

use crate::error::{Error, Result};
use crate::losses::mean_discrepancy;
use crate::models::{predict_labels, ModelBundle};
use crate::numkit::Tensor;
use crate::synthdata::SamplePair;
use serde::{Deserialize, Serialize};

/// K×K pixel counts; rows are ground truth, columns are prediction.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfusionMatrix {
    k: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(k: usize) -> Self {
        ConfusionMatrix {
            k,
            counts: vec![0; k * k],
        }
    }

    pub fn classes(&self) -> usize {
        self.k
    }

    pub fn count(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * self.k + pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Adds one image's pixels. Both maps are [H,W] class-id tensors.
    pub fn accumulate(&mut self, y_true: &Tensor, y_pred: &Tensor) -> Result<()> {
        if y_true.shape() != y_pred.shape() {
            return Err(Error::shape("truth and prediction shapes disagree"));
        }
        for (&t, &p) in y_true.data().iter().zip(y_pred.data()) {
            let (t, p) = (t as usize, p as usize);
            if t >= self.k || p >= self.k {
                return Err(Error::contract(format!(
                    "class id out of range: truth {t}, pred {p}, K={}",
                    self.k
                )));
            }
            self.counts[t * self.k + p] += 1;
        }
        Ok(())
    }

    /// Merges counts accumulated elsewhere (associative, commutative).
    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if self.k != other.k {
            return Err(Error::contract("cannot merge matrices of different K"));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }

    /// Per class: tp/(tp+fp+fn); `None` when the class is absent from both
    /// truth and prediction (denominator 0).
    pub fn iou_per_class(&self) -> Vec<Option<f64>> {
        (0..self.k)
            .map(|c| {
                let tp = self.count(c, c);
                let fp: u64 = (0..self.k).filter(|&t| t != c).map(|t| self.count(t, c)).sum();
                let fn_: u64 = (0..self.k).filter(|&p| p != c).map(|p| self.count(c, p)).sum();
                let denom = tp + fp + fn_;
                if denom == 0 {
                    None
                } else {
                    Some(tp as f64 / denom as f64)
                }
            })
            .collect()
    }

    /// Mean of the defined per-class IoUs. Classes absent from both truth
    /// and prediction are excluded from the mean rather than counted as 0.
    pub fn miou(&self) -> Result<f64> {
        let ious: Vec<f64> = self.iou_per_class().into_iter().flatten().collect();
        if ious.is_empty() {
            return Err(Error::contract("mIoU undefined: no class was observed"));
        }
        Ok(ious.iter().sum::<f64>() / ious.len() as f64)
    }
}

/// Evaluates a bundle on labeled samples: C1's argmax against the stored
/// labels.
pub fn evaluate_bundle(bundle: &ModelBundle, samples: &[SamplePair]) -> Result<ConfusionMatrix> {
    let mut cm = ConfusionMatrix::new(bundle.arch.classes);
    for s in samples {
        let (p1, _, _) = bundle.forward_seg(&s.image)?;
        let pred = predict_labels(&p1)?;
        let truth = predict_labels(&s.label)?;
        cm.accumulate(&truth, &pred)?;
    }
    Ok(cm)
}

/// Mean classifier discrepancy over a fixed evaluation set; no parameters
/// are touched. Tracks whether class-alignment training is on course.
pub fn target_discrepancy(bundle: &ModelBundle, samples: &[SamplePair]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::contract("evaluation set must be non-empty"));
    }
    let mut total = 0.0;
    for s in samples {
        let (p1, p2, _) = bundle.forward_seg(&s.image)?;
        total += mean_discrepancy(&p1, &p2)?;
    }
    Ok(total / samples.len() as f64)
}

/// Per-checkpoint metric summary for reports.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvalReport {
    pub iou_per_class: Vec<Option<f64>>,
    pub miou: f64,
    pub pixels: u64,
}

impl EvalReport {
    pub fn from_matrix(cm: &ConfusionMatrix) -> Result<Self> {
        Ok(EvalReport {
            iou_per_class: cm.iou_per_class(),
            miou: cm.miou()?,
            pixels: cm.total(),
        })
    }

    /// One CSV line per class plus the mean; undefined IoUs are left blank.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("class,iou\n");
        for (c, iou) in self.iou_per_class.iter().enumerate() {
            match iou {
                Some(v) => out.push_str(&format!("{c},{v}\n")),
                None => out.push_str(&format!("{c},\n")),
            }
        }
        out.push_str(&format!("miou,{}\n", self.miou));
        out
    }
}
