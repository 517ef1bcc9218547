//! Training objectives, each recorded as a scalar node on the graph.
//!
//! Losses are pure functions of model outputs. Logs are clamped (see
//! [`crate::numkit::LOG_CLAMP`]) so every loss stays finite no matter what
//! the networks emit. Expectations over a domain are single-sample
//! estimates: the trainer feeds one image per domain per iteration, and
//! each loss is a per-image pixel mean so magnitudes are
//! resolution-independent.

use crate::error::{Error, Result};
use crate::numkit::{Graph, NodeId, Tensor};

/// Domain tag of a batch or sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Source,
    Target,
}

/// One training batch: an image, its one-hot label when supervised, and
/// the domain it came from.
#[derive(Clone, Debug)]
pub struct Batch {
    pub x: Tensor,
    pub y: Option<Tensor>,
    pub domain: Domain,
}

/// Checks that `y[K,H,W]` is one-hot: entries are exactly 0 or 1 with a
/// single 1 per pixel.
pub fn validate_one_hot(y: &Tensor) -> Result<()> {
    let s = y.shape();
    if s.len() != 3 {
        return Err(Error::contract("label tensor must be [K,H,W]"));
    }
    let (k, hw) = (s[0], s[1] * s[2]);
    let data = y.data();
    for pix in 0..hw {
        let mut ones = 0;
        for c in 0..k {
            let v = data[c * hw + pix];
            if v == 1.0 {
                ones += 1;
            } else if v != 0.0 {
                return Err(Error::contract(format!(
                    "label entry {v} at pixel {pix} is not 0 or 1"
                )));
            }
        }
        if ones != 1 {
            return Err(Error::contract(format!(
                "pixel {pix} has {ones} ones in its label, expected exactly 1"
            )));
        }
    }
    Ok(())
}

/// Supervised segmentation loss over both heads:
/// −(1/2)·mean over pixels of y·log(p1⊙p2), which equals the average of
/// the two per-head cross-entropies.
pub fn seg_loss(g: &mut Graph, p1: NodeId, p2: NodeId, y: &Tensor) -> Result<NodeId> {
    if g.shape(p1) != y.shape() || g.shape(p2) != y.shape() {
        return Err(Error::shape(format!(
            "seg_loss shapes disagree: p1 {:?}, p2 {:?}, y {:?}",
            g.shape(p1),
            g.shape(p2),
            y.shape()
        )));
    }
    validate_one_hot(y)?;
    let hw = (y.shape()[1] * y.shape()[2]) as f64;
    let yi = g.constant(y);
    let lp1 = g.log_clamped(p1);
    let lp2 = g.log_clamped(p2);
    let s = g.add(lp1, lp2)?;
    let masked = g.mul(s, yi)?;
    let total = g.sum(masked);
    Ok(g.affine(total, -0.5 / hw, 0.0))
}

/// Joint domain-adversarial value for G and D:
/// V1 = −(CE_s + CE_t) = log d_src + log(1 − d_tgt).
///
/// A correct discriminator maximizes V1; the extractor minimizes it. Both
/// logs are clamped, so the worst case is finite.
pub fn domain_loss(g: &mut Graph, d_src: NodeId, d_tgt: NodeId) -> Result<NodeId> {
    if g.value(d_src).len() != 1 || g.value(d_tgt).len() != 1 {
        return Err(Error::shape("domain_loss expects scalar discriminator outputs"));
    }
    let ls = g.log_clamped(d_src);
    let one_minus = g.affine(d_tgt, -1.0, 1.0);
    let lt = g.log_clamped(one_minus);
    g.add(ls, lt)
}

/// L1 distance between two distributions scaled by 1/K:
/// d(p, q) = (1/K)·|p − q|₁ ∈ [0, 2/K].
pub fn discrepancy(p: &[f64], q: &[f64]) -> f64 {
    debug_assert_eq!(p.len(), q.len());
    let k = p.len() as f64;
    p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>() / k
}

/// Mean per-pixel discrepancy between two prediction maps [K,H,W].
pub fn mean_discrepancy(p1: &Tensor, p2: &Tensor) -> Result<f64> {
    if p1.shape() != p2.shape() || p1.shape().len() != 3 {
        return Err(Error::shape("mean_discrepancy expects matching [K,H,W] maps"));
    }
    let k = p1.shape()[0] as f64;
    let hw = (p1.shape()[1] * p1.shape()[2]) as f64;
    let l1: f64 = p1
        .data()
        .iter()
        .zip(p2.data())
        .map(|(a, b)| (a - b).abs())
        .sum();
    Ok(l1 / (k * hw))
}

/// Class-alignment value V2: mean over pixels of the per-pixel
/// discrepancy between the two heads on a target image.
pub fn class_alignment_loss(g: &mut Graph, p1: NodeId, p2: NodeId) -> Result<NodeId> {
    let s = g.shape(p1);
    if s != g.shape(p2) || s.len() != 3 {
        return Err(Error::shape("class_alignment_loss expects matching [K,H,W] maps"));
    }
    let scale = 1.0 / (s[0] * s[1] * s[2]) as f64;
    let diff = g.sub(p1, p2)?;
    let a = g.abs(diff);
    let total = g.sum(a);
    Ok(g.affine(total, scale, 0.0))
}

/// Cosine similarity of the two heads' flattened weight vectors.
/// Minimized to keep C1 and C2 from converging to the same network.
pub fn weight_regularization(g: &mut Graph, w1: NodeId, w2: NodeId) -> Result<NodeId> {
    if g.value(w1).len() != g.value(w2).len() {
        return Err(Error::shape("weight vectors must have equal length"));
    }
    let sq = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
    if sq(g.value(w1)) == 0.0 || sq(g.value(w2)) == 0.0 {
        return Err(Error::contract("weight_regularization: zero weight vector"));
    }
    let d12 = g.dot(w1, w2)?;
    let d11 = g.dot(w1, w1)?;
    let d22 = g.dot(w2, w2)?;
    let nn = g.mul(d11, d22)?;
    let inv_norm = g.pow_const(nn, -0.5);
    g.mul(d12, inv_norm)
}

/// Supervised loss on mixed data: mean per-pixel cross-entropy of C1's
/// prediction against the assembled mixed label.
pub fn mixed_loss(g: &mut Graph, p_m: NodeId, y_m: &Tensor) -> Result<NodeId> {
    if g.shape(p_m) != y_m.shape() {
        return Err(Error::shape(format!(
            "mixed_loss shapes disagree: p {:?}, y {:?}",
            g.shape(p_m),
            y_m.shape()
        )));
    }
    validate_one_hot(y_m)?;
    let hw = (y_m.shape()[1] * y_m.shape()[2]) as f64;
    let yi = g.constant(y_m);
    let lp = g.log_clamped(p_m);
    let masked = g.mul(lp, yi)?;
    let total = g.sum(masked);
    Ok(g.affine(total, -1.0 / hw, 0.0))
}
