//! The alternating training loop and its baselines.
//!
//! One iteration always minimizes the supervised segmentation loss and the
//! weight regularization. Domain-alignment and class-alignment phases then
//! alternate every `interval` iterations (method `cali`/`icali`); the
//! baselines run their single alignment every iteration (`da`, `ca`) or
//! never (`so`). The informed-mixing variant appends a supervised step on
//! mixed source/target data once its per-class IoU window is full.
//!
//! Update order inside each minimax step matters: the feature extractor
//! moves first, then its adversary. The `ablation_wrong_order` flag swaps
//! the two sub-steps of the domain game to reproduce the collapse that
//! ordering causes.

use crate::error::{Error, Result};
use crate::evalkit::ConfusionMatrix;
use crate::losses::{
    class_alignment_loss, domain_loss, mean_discrepancy, mixed_loss, seg_loss,
    weight_regularization, Batch, Domain,
};
use crate::models::{
    one_hot, predict_labels, ArchitectureConfig, Head, ModelBundle, NetId, OptimizerConfig,
    Recorded,
};
use crate::numkit::rng::{derive, Rng};
use crate::numkit::{poly_lr, Graph, Tensor};
use crate::synthdata::{Dataset, SamplePair};
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::fmt::Write as _;
use std::path::Path;

/// Training method selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Source-only supervised training.
    So,
    /// Supervised + adversarial domain alignment every iteration.
    Da,
    /// Supervised + classifier-discrepancy alignment every iteration.
    Ca,
    /// Alternating domain/class alignment.
    Cali,
    /// Cali plus informed mixing and extra supervised training.
    Icali,
}

impl Method {
    pub fn parse(s: &str) -> Result<Method> {
        match s {
            "so" => Ok(Method::So),
            "da" => Ok(Method::Da),
            "ca" => Ok(Method::Ca),
            "cali" => Ok(Method::Cali),
            "icali" => Ok(Method::Icali),
            other => Err(Error::config(format!(
                "unknown method '{other}' (expected so|da|ca|cali|icali)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Method::So => "so",
            Method::Da => "da",
            Method::Ca => "ca",
            Method::Cali => "cali",
            Method::Icali => "icali",
        }
    }
}

/// Alignment phase of the current iteration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Domain,
    Class,
}

impl Phase {
    fn name(&self) -> &'static str {
        match self {
            Phase::Domain => "domain",
            Phase::Class => "class",
        }
    }
}

/// Hyperparameters of one training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub method: Method,
    /// Maximum iterations M.
    pub max_iters: u64,
    /// Phase-toggle interval I.
    pub interval: u64,
    /// SGD learning rate during domain-alignment phases (and for `so`/`da`).
    pub lr_da: f64,
    /// SGD learning rate during class-alignment phases (and for `ca`).
    pub lr_ca: f64,
    /// Adaptive-moments learning rate of the discriminator.
    pub lr_disc: f64,
    /// Poly schedule exponent applied to every learning rate.
    pub poly_power: f64,
    /// Fraction of classes treated as under-performing by informed mixing.
    pub icali_ratio: f64,
    /// Number of recent source batches the per-class IoU window spans.
    pub iou_window: usize,
    /// Swap the two sub-steps of the domain game (discriminator first).
    pub ablation_wrong_order: bool,
    pub seed: u64,
    /// Evaluate and log every this many iterations.
    pub eval_every: u64,
    /// Checkpoint every this many iterations (0 disables).
    pub checkpoint_every: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            method: Method::Cali,
            max_iters: 5000,
            interval: 50,
            lr_da: 2.5e-4,
            lr_ca: 1e-3,
            lr_disc: 1e-4,
            poly_power: 0.9,
            icali_ratio: 0.5,
            iou_window: 50,
            ablation_wrong_order: false,
            seed: 0,
            eval_every: 100,
            checkpoint_every: 1000,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 || self.interval == 0 {
            return Err(Error::config("max_iters and interval must be at least 1"));
        }
        if !(self.icali_ratio > 0.0 && self.icali_ratio < 1.0) {
            return Err(Error::config("icali_ratio must lie strictly inside (0,1)"));
        }
        if self.iou_window == 0 {
            return Err(Error::config("iou_window must be at least 1"));
        }
        if self.eval_every == 0 {
            return Err(Error::config("eval_every must be at least 1"));
        }
        for lr in [self.lr_da, self.lr_ca, self.lr_disc] {
            if !(lr.is_finite() && lr >= 0.0) {
                return Err(Error::config("learning rates must be non-negative"));
            }
        }
        Ok(())
    }
}

// ---- per-class running performance -----------------------------------------

/// Running per-class IoU over the last `window` source batches, and the
/// well/under partition it induces.
#[derive(Clone, Debug)]
pub struct ClassPerformance {
    k: usize,
    window: usize,
    ratio: f64,
    /// per batch, per class: [tp, fp, fn]
    history: VecDeque<Vec<[u64; 3]>>,
}

impl ClassPerformance {
    pub fn new(k: usize, window: usize, ratio: f64) -> Self {
        ClassPerformance {
            k,
            window,
            ratio,
            history: VecDeque::with_capacity(window + 1),
        }
    }

    /// Adds one source batch's prediction/truth id maps.
    pub fn push(&mut self, truth: &Tensor, pred: &Tensor) -> Result<()> {
        let mut cm = ConfusionMatrix::new(self.k);
        cm.accumulate(truth, pred)?;
        let mut entry = vec![[0u64; 3]; self.k];
        for (c, e) in entry.iter_mut().enumerate() {
            let tp = cm.count(c, c);
            let fp: u64 = (0..self.k).filter(|&t| t != c).map(|t| cm.count(t, c)).sum();
            let fn_: u64 = (0..self.k).filter(|&p| p != c).map(|p| cm.count(c, p)).sum();
            *e = [tp, fp, fn_];
        }
        self.history.push_back(entry);
        while self.history.len() > self.window {
            self.history.pop_front();
        }
        Ok(())
    }

    pub fn full(&self) -> bool {
        self.history.len() >= self.window
    }

    /// IoU per class over the window; classes never observed score 0.
    pub fn iou(&self) -> Vec<f64> {
        (0..self.k)
            .map(|c| {
                let mut tp = 0u64;
                let mut denom = 0u64;
                for batch in &self.history {
                    tp += batch[c][0];
                    denom += batch[c][0] + batch[c][1] + batch[c][2];
                }
                if denom == 0 {
                    0.0
                } else {
                    tp as f64 / denom as f64
                }
            })
            .collect()
    }

    /// The under-performing set: the ⌈ratio·K⌉ classes with lowest IoU,
    /// ties broken toward the lower class id. The complement is the
    /// well-performing set; together they always cover all classes.
    pub fn partition(&self) -> (Vec<usize>, Vec<usize>) {
        let ious = self.iou();
        let mut order: Vec<usize> = (0..self.k).collect();
        order.sort_by(|&a, &b| ious[a].total_cmp(&ious[b]).then(a.cmp(&b)));
        let n_under = ((self.ratio * self.k as f64).ceil() as usize).clamp(1, self.k);
        let mut under = order[..n_under].to_vec();
        let mut well = order[n_under..].to_vec();
        under.sort_unstable();
        well.sort_unstable();
        (well, under)
    }
}

// ---- individual steps -------------------------------------------------------

/// Loss and the source prediction of one supervised step.
pub struct SupervisedOutcome {
    pub loss: f64,
    pub source_pred: Tensor,
}

/// One optimizer step on G, C1, C2 against the supervised segmentation
/// loss. The batch must carry labels.
pub fn supervised_step(bundle: &mut ModelBundle, batch: &Batch, lr: f64) -> Result<SupervisedOutcome> {
    let y = batch
        .y
        .as_ref()
        .ok_or_else(|| Error::contract("supervised_step requires a labeled batch"))?;
    let mut g = Graph::new();
    let mut rec = Recorded::default();
    let xi = g.constant(&batch.x);
    let f = bundle.record_extractor(&mut g, xi, &mut rec, true)?;
    let p1 = bundle.record_head(&mut g, Head::C1, f, &mut rec, true)?;
    let p2 = bundle.record_head(&mut g, Head::C2, f, &mut rec, true)?;
    let loss = seg_loss(&mut g, p1, p2, y)?;
    let loss_v = g.scalar_value(loss);
    if !loss_v.is_finite() {
        return Err(Error::numeric("supervised loss is not finite"));
    }
    let p1_t = Tensor::new(g.shape(p1).to_vec(), g.value(p1).to_vec())?;
    g.backward(loss)?;
    bundle.collect_grads(&g, &rec, &[NetId::Extractor, NetId::Head1, NetId::Head2])?;
    bundle.step_net(NetId::Extractor, lr)?;
    bundle.step_net(NetId::Head1, lr)?;
    bundle.step_net(NetId::Head2, lr)?;
    Ok(SupervisedOutcome {
        loss: loss_v,
        source_pred: predict_labels(&p1_t)?,
    })
}

/// One step on C1 and C2 minimizing their weight-vector cosine similarity.
/// The extractor is untouched.
pub fn wr_step(bundle: &mut ModelBundle, lr: f64) -> Result<f64> {
    let mut g = Graph::new();
    let mut h1_nodes = Vec::new();
    let mut h2_nodes = Vec::new();
    for layer in &bundle.head1.layers {
        h1_nodes.push(g.leaf(&layer.weight));
        h1_nodes.push(g.leaf(&layer.bias));
    }
    for layer in &bundle.head2.layers {
        h2_nodes.push(g.leaf(&layer.weight));
        h2_nodes.push(g.leaf(&layer.bias));
    }
    let w1 = g.concat(&h1_nodes);
    let w2 = g.concat(&h2_nodes);
    let wr = weight_regularization(&mut g, w1, w2)?;
    let wr_v = g.scalar_value(wr);
    g.backward(wr)?;

    for (net_id, nodes) in [(NetId::Head1, &h1_nodes), (NetId::Head2, &h2_nodes)] {
        let net = match net_id {
            NetId::Head1 => &mut bundle.head1,
            NetId::Head2 => &mut bundle.head2,
            _ => unreachable!(),
        };
        let mut it = nodes.iter();
        for layer in &mut net.layers {
            g.grad_into(*it.next().unwrap(), &mut layer.weight)?;
            g.grad_into(*it.next().unwrap(), &mut layer.bias)?;
        }
    }
    bundle.step_net(NetId::Head1, lr)?;
    bundle.step_net(NetId::Head2, lr)?;
    Ok(wr_v)
}

/// Outcome of one domain-alignment step: the adversarial value and the
/// discriminator outputs from the final sub-step's forward pass.
pub struct DaOutcome {
    pub v1: f64,
    pub d_src: f64,
    pub d_tgt: f64,
}

/// One domain-alignment step.
///
/// Normal order: sub-step 1 updates only G to minimize V1, sub-step 2
/// updates only D to maximize V1. With `wrong_order` the discriminator
/// trains first. The reported values come from the last sub-step's
/// forward pass.
pub fn da_step(
    bundle: &mut ModelBundle,
    src: &Batch,
    tgt: &Batch,
    lr_g: f64,
    lr_d: f64,
    wrong_order: bool,
) -> Result<DaOutcome> {
    let order = if wrong_order {
        [SubStep::Disc, SubStep::Gen]
    } else {
        [SubStep::Gen, SubStep::Disc]
    };
    let mut last = None;
    for sub in order {
        last = Some(da_sub_step(bundle, src, tgt, sub, lr_g, lr_d)?);
    }
    Ok(last.expect("two sub-steps ran"))
}

#[derive(Clone, Copy, PartialEq)]
enum SubStep {
    Gen,
    Disc,
}

fn da_sub_step(
    bundle: &mut ModelBundle,
    src: &Batch,
    tgt: &Batch,
    sub: SubStep,
    lr_g: f64,
    lr_d: f64,
) -> Result<DaOutcome> {
    let mut g = Graph::new();
    let mut rec = Recorded::default();
    let train_g = sub == SubStep::Gen;
    let xs = g.constant(&src.x);
    let xt = g.constant(&tgt.x);
    let fs = bundle.record_extractor(&mut g, xs, &mut rec, train_g)?;
    let ft = bundle.record_extractor(&mut g, xt, &mut rec, train_g)?;
    let ds = bundle.record_discriminator(&mut g, fs, &mut rec, !train_g)?;
    let dt = bundle.record_discriminator(&mut g, ft, &mut rec, !train_g)?;
    let v1 = domain_loss(&mut g, ds, dt)?;
    let v1_v = g.scalar_value(v1);
    if !v1_v.is_finite() {
        return Err(Error::numeric("domain value is not finite"));
    }
    let out = DaOutcome {
        v1: v1_v,
        d_src: g.scalar_value(ds),
        d_tgt: g.scalar_value(dt),
    };
    match sub {
        SubStep::Gen => {
            // G minimizes V1
            g.backward(v1)?;
            // the extractor was recorded twice (source and target pass);
            // gradients of both passes accumulate into the same tensors
            let mut grads: Vec<Vec<f64>> = Vec::new();
            let entries: Vec<_> = rec.nodes_for(NetId::Extractor).collect();
            let per_pass = bundle.extractor.layers.len() * 2;
            for (i, (layer, is_bias, node)) in entries.iter().enumerate() {
                let gslice = g
                    .grad(*node)
                    .ok_or_else(|| Error::contract("missing extractor gradient"))?;
                if i < per_pass {
                    grads.push(gslice.to_vec());
                } else {
                    let dst = &mut grads[i - per_pass];
                    for (d, s) in dst.iter_mut().zip(gslice) {
                        *d += s;
                    }
                }
                let _ = (layer, is_bias);
            }
            let mut gi = grads.into_iter();
            for layer in &mut bundle.extractor.layers {
                layer.weight.set_grad(gi.next().unwrap())?;
                layer.bias.set_grad(gi.next().unwrap())?;
            }
            bundle.step_net(NetId::Extractor, lr_g)?;
        }
        SubStep::Disc => {
            // D maximizes V1: descend on −V1
            let neg = g.affine(v1, -1.0, 0.0);
            g.backward(neg)?;
            let entries: Vec<_> = rec.nodes_for(NetId::Discriminator).collect();
            let per_pass = bundle.discriminator.layers.len() * 2;
            let mut grads: Vec<Vec<f64>> = Vec::new();
            for (i, (_, _, node)) in entries.iter().enumerate() {
                let gslice = g
                    .grad(*node)
                    .ok_or_else(|| Error::contract("missing discriminator gradient"))?;
                if i < per_pass {
                    grads.push(gslice.to_vec());
                } else {
                    let dst = &mut grads[i - per_pass];
                    for (d, s) in dst.iter_mut().zip(gslice) {
                        *d += s;
                    }
                }
            }
            let mut gi = grads.into_iter();
            for layer in &mut bundle.discriminator.layers {
                layer.weight.set_grad(gi.next().unwrap())?;
                layer.bias.set_grad(gi.next().unwrap())?;
            }
            bundle.step_net(NetId::Discriminator, lr_d)?;
        }
    }
    Ok(out)
}

/// One class-alignment step: sub-step 1 updates only G minimizing the
/// head discrepancy on the target batch, sub-step 2 updates only C1/C2
/// maximizing it. Returns the discrepancy from the last forward pass.
pub fn ca_step(bundle: &mut ModelBundle, tgt: &Batch, lr: f64) -> Result<f64> {
    // sub-step 1: G minimizes V2, heads frozen
    let v2 = {
        let mut g = Graph::new();
        let mut rec = Recorded::default();
        let xt = g.constant(&tgt.x);
        let f = bundle.record_extractor(&mut g, xt, &mut rec, true)?;
        let p1 = bundle.record_head(&mut g, Head::C1, f, &mut rec, false)?;
        let p2 = bundle.record_head(&mut g, Head::C2, f, &mut rec, false)?;
        let v2 = class_alignment_loss(&mut g, p1, p2)?;
        if !g.scalar_value(v2).is_finite() {
            return Err(Error::numeric("class-alignment value is not finite"));
        }
        g.backward(v2)?;
        bundle.collect_grads(&g, &rec, &[NetId::Extractor])?;
        bundle.step_net(NetId::Extractor, lr)?;
        v2
    };
    let _ = v2;

    // sub-step 2: heads maximize V2, G frozen
    let mut g = Graph::new();
    let mut rec = Recorded::default();
    let xt = g.constant(&tgt.x);
    let f = bundle.record_extractor(&mut g, xt, &mut rec, false)?;
    let p1 = bundle.record_head(&mut g, Head::C1, f, &mut rec, true)?;
    let p2 = bundle.record_head(&mut g, Head::C2, f, &mut rec, true)?;
    let v2 = class_alignment_loss(&mut g, p1, p2)?;
    let v2_v = g.scalar_value(v2);
    let neg = g.affine(v2, -1.0, 0.0);
    g.backward(neg)?;
    bundle.collect_grads(&g, &rec, &[NetId::Head1, NetId::Head2])?;
    bundle.step_net(NetId::Head1, lr)?;
    bundle.step_net(NetId::Head2, lr)?;
    Ok(v2_v)
}

// ---- informed mixing ---------------------------------------------------------

/// Builds the source selection mask: 1 where the source label belongs to
/// an under-performing class, with the target mask as its complement.
pub fn icali_build_mask(perf: &ClassPerformance, y_s: &Tensor) -> Result<(Tensor, Tensor)> {
    let s = y_s.shape();
    if s.len() != 3 {
        return Err(Error::shape("icali_build_mask expects y[K,H,W]"));
    }
    let (k, h, w) = (s[0], s[1], s[2]);
    let (_, under) = perf.partition();
    let hw = h * w;
    let mut m_s = vec![0.0f64; hw];
    for &c in &under {
        if c >= k {
            return Err(Error::contract("partition class id out of range"));
        }
        for pix in 0..hw {
            if y_s.data()[c * hw + pix] == 1.0 {
                m_s[pix] = 1.0;
            }
        }
    }
    let m_t: Vec<f64> = m_s.iter().map(|v| 1.0 - v).collect();
    Ok((
        Tensor::new(vec![h, w], m_s)?,
        Tensor::new(vec![h, w], m_t)?,
    ))
}

/// Assembles the mixed image and label:
/// x_m = x_s⊙M_s ⊕ x_t⊙M_t and y_m = y_s⊙M_s ⊕ o_1t⊙M_t.
pub fn icali_mix(
    x_s: &Tensor,
    y_s: &Tensor,
    x_t: &Tensor,
    o_1t: &Tensor,
    m_s: &Tensor,
    m_t: &Tensor,
) -> Result<(Tensor, Tensor)> {
    if x_s.shape() != x_t.shape() || y_s.shape() != o_1t.shape() {
        return Err(Error::shape("mix inputs must share shapes"));
    }
    if m_s.shape() != m_t.shape() || m_s.shape().len() != 2 {
        return Err(Error::shape("masks must be [H,W]"));
    }
    let hw = m_s.numel();
    for (a, b) in m_s.data().iter().zip(m_t.data()) {
        if (*a != 0.0 && *a != 1.0) || (*b != 0.0 && *b != 1.0) {
            return Err(Error::contract("masks must be binary"));
        }
        if a + b != 1.0 {
            return Err(Error::contract("target mask must complement the source mask"));
        }
    }
    let blend = |src: &Tensor, tgt: &Tensor| -> Result<Tensor> {
        let ch = src.numel() / hw;
        let mut out = vec![0.0f64; src.numel()];
        for c in 0..ch {
            for pix in 0..hw {
                let m = m_s.data()[pix];
                out[c * hw + pix] =
                    src.data()[c * hw + pix] * m + tgt.data()[c * hw + pix] * (1.0 - m);
            }
        }
        Tensor::new(src.shape().to_vec(), out)
    };
    Ok((blend(x_s, x_t)?, blend(y_s, o_1t)?))
}

/// One step on G and C1 only against the cross-entropy on mixed data.
/// C2 and D are untouched so the head pair stays differentiated.
pub fn icali_step(bundle: &mut ModelBundle, x_m: &Tensor, y_m: &Tensor, lr: f64) -> Result<f64> {
    let mut g = Graph::new();
    let mut rec = Recorded::default();
    let xi = g.constant(x_m);
    let f = bundle.record_extractor(&mut g, xi, &mut rec, true)?;
    let p1 = bundle.record_head(&mut g, Head::C1, f, &mut rec, true)?;
    let loss = mixed_loss(&mut g, p1, y_m)?;
    let loss_v = g.scalar_value(loss);
    if !loss_v.is_finite() {
        return Err(Error::numeric("mixed loss is not finite"));
    }
    g.backward(loss)?;
    bundle.collect_grads(&g, &rec, &[NetId::Extractor, NetId::Head1])?;
    bundle.step_net(NetId::Extractor, lr)?;
    bundle.step_net(NetId::Head1, lr)?;
    Ok(loss_v)
}

// ---- the full loop -----------------------------------------------------------

/// One metrics-log row, written every `eval_every` iterations.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MetricsRow {
    pub iter: u64,
    pub phase: String,
    pub seg_loss: Option<f64>,
    pub v1: Option<f64>,
    pub v2: Option<f64>,
    pub wr: Option<f64>,
    pub target_discrepancy: f64,
    /// Running discriminator batch accuracy over recent domain steps.
    pub d_acc: Option<f64>,
    /// High-water mark of the running accuracy since the previous row.
    pub d_acc_peak: Option<f64>,
    pub iou_per_class: Vec<Option<f64>>,
    pub miou: f64,
}

/// Everything a finished run hands back.
pub struct RunOutcome {
    pub bundle: ModelBundle,
    pub metrics: Vec<MetricsRow>,
    pub final_miou: f64,
}

fn opt_cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Renders the metrics log as CSV.
pub fn metrics_to_csv(rows: &[MetricsRow], classes: usize) -> String {
    let mut out = String::from("iter,phase,seg_loss,v1,v2,wr,target_discrepancy,d_acc,d_acc_peak");
    for c in 0..classes {
        let _ = write!(out, ",iou_{c}");
    }
    out.push_str(",miou\n");
    for r in rows {
        let _ = write!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.iter,
            r.phase,
            opt_cell(r.seg_loss),
            opt_cell(r.v1),
            opt_cell(r.v2),
            opt_cell(r.wr),
            r.target_discrepancy,
            opt_cell(r.d_acc)
        );
        let _ = write!(out, ",{}", opt_cell(r.d_acc_peak));
        for iou in &r.iou_per_class {
            let _ = write!(out, ",{}", opt_cell(*iou));
        }
        let _ = writeln!(out, ",{}", r.miou);
    }
    out
}

/// Evaluates C1 mIoU and the head discrepancy on the eval set with one
/// forward pass per sample.
fn evaluate(
    bundle: &ModelBundle,
    eval: &[SamplePair],
) -> Result<(Vec<Option<f64>>, f64, f64)> {
    let mut cm = ConfusionMatrix::new(bundle.arch.classes);
    let mut disc = 0.0;
    for s in eval {
        let (p1, p2, _) = bundle.forward_seg(&s.image)?;
        disc += mean_discrepancy(&p1, &p2)?;
        let pred = predict_labels(&p1)?;
        let truth = predict_labels(&s.label)?;
        cm.accumulate(&truth, &pred)?;
    }
    Ok((
        cm.iou_per_class(),
        cm.miou()?,
        disc / eval.len() as f64,
    ))
}

/// Runs one training configuration end to end.
///
/// Target labels are never read during training: target batches enter the
/// loop unlabeled, and `target_eval` is only touched by the evaluation
/// pass. Checkpoints land in `out_dir` when given; on a numeric abort a
/// diagnostic snapshot is written there too.
pub fn run(
    cfg: &TrainConfig,
    arch: &ArchitectureConfig,
    opt: &OptimizerConfig,
    source: &Dataset,
    target: &Dataset,
    target_eval: &[SamplePair],
    out_dir: Option<&Path>,
) -> Result<RunOutcome> {
    cfg.validate()?;
    arch.validate()?;
    if source.samples.is_empty() || target.samples.is_empty() || target_eval.is_empty() {
        return Err(Error::config("datasets must be non-empty"));
    }
    let mut bundle = ModelBundle::build(arch, opt, cfg.seed)?;
    let k = arch.classes;
    let mut perf = ClassPerformance::new(k, cfg.iou_window, cfg.icali_ratio);
    let mut batch_rng = Rng::new(derive(cfg.seed, 0xBA7C));
    let mut metrics = Vec::new();
    let mut d_acc_window: VecDeque<f64> = VecDeque::with_capacity(24);
    let mut d_acc_peak: Option<f64> = None;

    let mut is_domain = true;
    let mut last = (None::<f64>, None::<f64>, None::<f64>, None::<f64>); // seg, v1, v2, wr

    let log_row = |bundle: &ModelBundle,
                   iter: u64,
                   phase: Phase,
                   last: &(Option<f64>, Option<f64>, Option<f64>, Option<f64>),
                   d_acc_window: &VecDeque<f64>,
                   d_acc_peak: Option<f64>,
                   metrics: &mut Vec<MetricsRow>|
     -> Result<()> {
        let (iou, miou, disc) = evaluate(bundle, target_eval)?;
        metrics.push(MetricsRow {
            iter,
            phase: phase.name().to_string(),
            seg_loss: last.0,
            v1: last.1,
            v2: last.2,
            wr: last.3,
            target_discrepancy: disc,
            d_acc: if d_acc_window.is_empty() {
                None
            } else {
                Some(d_acc_window.iter().sum::<f64>() / d_acc_window.len() as f64)
            },
            d_acc_peak,
            iou_per_class: iou,
            miou,
        });
        Ok(())
    };

    let abort = |iter: u64, phase: Phase, err: Error, out_dir: Option<&Path>| -> Error {
        if let Some(dir) = out_dir {
            let snapshot = serde_json::json!({
                "iter": iter,
                "phase": phase.name(),
                "error": err.to_string(),
            });
            let _ = std::fs::create_dir_all(dir);
            let _ = std::fs::write(
                dir.join("abort_snapshot.json"),
                serde_json::to_string_pretty(&snapshot).unwrap_or_default(),
            );
        }
        Error::numeric(format!("aborted at iteration {iter}: {err}"))
    };

    // initial state row
    log_row(&bundle, 0, Phase::Domain, &last, &d_acc_window, None, &mut metrics)?;

    for m in 1..=cfg.max_iters {
        if matches!(cfg.method, Method::Cali | Method::Icali) && m % cfg.interval == 0 {
            is_domain = !is_domain;
        }
        let phase = match cfg.method {
            Method::So | Method::Da => Phase::Domain,
            Method::Ca => Phase::Class,
            Method::Cali | Method::Icali => {
                if is_domain {
                    Phase::Domain
                } else {
                    Phase::Class
                }
            }
        };
        let do_domain = match cfg.method {
            Method::Da => true,
            Method::Cali | Method::Icali => phase == Phase::Domain,
            _ => false,
        };
        let do_class = match cfg.method {
            Method::Ca => true,
            Method::Cali | Method::Icali => phase == Phase::Class,
            _ => false,
        };

        // one image per domain per iteration
        let src_pair = &source.samples[batch_rng.index(source.samples.len())];
        let tgt_pair = &target.samples[batch_rng.index(target.samples.len())];
        let src_batch = Batch {
            x: src_pair.image.clone(),
            y: Some(src_pair.label.clone()),
            domain: Domain::Source,
        };
        let tgt_batch = Batch {
            x: tgt_pair.image.clone(),
            y: None,
            domain: Domain::Target,
        };

        // poly-decayed learning rates; the SGD base depends on the phase
        let sched = |base: f64| poly_lr(base, m - 1, cfg.max_iters, cfg.poly_power);
        let lr_sgd = match phase {
            Phase::Domain => sched(cfg.lr_da)?,
            Phase::Class => sched(cfg.lr_ca)?,
        };
        let lr_d = sched(cfg.lr_disc)?;

        let sup = supervised_step(&mut bundle, &src_batch, lr_sgd)
            .map_err(|e| abort(m, phase, e, out_dir))?;
        if cfg.method == Method::Icali {
            let truth = predict_labels(&src_pair.label)?;
            perf.push(&truth, &sup.source_pred)?;
        }
        let wr = wr_step(&mut bundle, lr_sgd).map_err(|e| abort(m, phase, e, out_dir))?;

        let mut v1 = None;
        if do_domain {
            let out = da_step(
                &mut bundle,
                &src_batch,
                &tgt_batch,
                lr_sgd,
                lr_d,
                cfg.ablation_wrong_order,
            )
            .map_err(|e| abort(m, phase, e, out_dir))?;
            v1 = Some(out.v1);
            let acc =
                ((out.d_src > 0.5) as u32 as f64 + (out.d_tgt < 0.5) as u32 as f64) / 2.0;
            d_acc_window.push_back(acc);
            while d_acc_window.len() > 20 {
                d_acc_window.pop_front();
            }
            if d_acc_window.len() == 20 {
                let mean = d_acc_window.iter().sum::<f64>() / 20.0;
                d_acc_peak = Some(d_acc_peak.map_or(mean, |p: f64| p.max(mean)));
            }
        }
        let mut v2 = None;
        if do_class {
            v2 = Some(
                ca_step(&mut bundle, &tgt_batch, lr_sgd)
                    .map_err(|e| abort(m, phase, e, out_dir))?,
            );
        }

        if cfg.method == Method::Icali && perf.full() {
            let (m_s, m_t) = icali_build_mask(&perf, &src_pair.label)?;
            let (p1t, _, _) = bundle.forward_seg(&tgt_pair.image)?;
            let o_1t = one_hot(&predict_labels(&p1t)?, k)?;
            let (x_m, y_m) = icali_mix(
                &src_pair.image,
                &src_pair.label,
                &tgt_pair.image,
                &o_1t,
                &m_s,
                &m_t,
            )?;
            icali_step(&mut bundle, &x_m, &y_m, lr_sgd)
                .map_err(|e| abort(m, phase, e, out_dir))?;
        }

        bundle.iteration = m;
        last = (Some(sup.loss), v1.or(last.1), v2.or(last.2), Some(wr));

        if m % cfg.eval_every == 0 || m == cfg.max_iters {
            log_row(&bundle, m, phase, &last, &d_acc_window, d_acc_peak, &mut metrics)?;
            d_acc_peak = None;
        }
        if cfg.checkpoint_every > 0 && m % cfg.checkpoint_every == 0 {
            if let Some(dir) = out_dir {
                std::fs::create_dir_all(dir)?;
                let mut f = std::io::BufWriter::new(std::fs::File::create(
                    dir.join(format!("ckpt_{m:06}.cali")),
                )?);
                bundle.save_checkpoint(&mut f)?;
            }
        }
    }

    let final_miou = metrics.last().map(|r| r.miou).unwrap_or(f64::NAN);
    Ok(RunOutcome {
        bundle,
        metrics,
        final_miou,
    })
}
