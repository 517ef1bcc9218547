//! The four networks of the pseudo-trilateral structure and their
//! checkpoint format.
//!
//! A [`ModelBundle`] holds a shared feature extractor `G` (stride-1 3×3
//! conv stack, spatial dims preserved), two per-pixel classifier heads
//! `C1`/`C2` (1×1 conv to K logits, softmaxed), and a domain discriminator
//! `D` (strided 4×4 conv stack over the intermediate feature map, mean
//! logit through a sigmoid). The discriminator reads the shared feature
//! `f`, never the classifier outputs, so the domain game and the class
//! game pull on the same representation.

use crate::error::{Error, Result};
use crate::numkit::rng::{derive, Rng};
use crate::numkit::{optimizer_step, Graph, NodeId, OptimizerState, Tensor};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

/// Sizes of the desk-scale networks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArchitectureConfig {
    /// Segmentation class count K.
    pub classes: usize,
    /// Input image channels.
    pub in_channels: usize,
    /// Channels of the shared feature map f.
    pub feature_channels: usize,
    /// Number of 3×3 stride-1 layers in the extractor.
    pub extractor_layers: usize,
    /// Channel schedule of the strided discriminator; the last entry must
    /// be 1 (scalar domain logit per patch).
    pub discriminator_channels: Vec<usize>,
    pub leaky_slope: f64,
}

impl Default for ArchitectureConfig {
    fn default() -> Self {
        ArchitectureConfig {
            classes: 4,
            in_channels: 3,
            feature_channels: 16,
            extractor_layers: 3,
            discriminator_channels: vec![16, 32, 1],
            leaky_slope: 0.2,
        }
    }
}

impl ArchitectureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 {
            return Err(Error::config("classes must be at least 2"));
        }
        if self.in_channels == 0 || self.feature_channels == 0 || self.extractor_layers == 0 {
            return Err(Error::config("network sizes must be positive"));
        }
        if self.discriminator_channels.is_empty()
            || self.discriminator_channels.iter().any(|&c| c == 0)
        {
            return Err(Error::config("discriminator channels must be positive"));
        }
        if *self.discriminator_channels.last().unwrap() != 1 {
            return Err(Error::config("discriminator must end in a single channel"));
        }
        if !(self.leaky_slope.is_finite() && self.leaky_slope >= 0.0 && self.leaky_slope < 1.0) {
            return Err(Error::config("leaky_slope must be in [0, 1)"));
        }
        Ok(())
    }
}

/// One convolution layer with bias.
#[derive(Clone, Debug)]
pub struct ConvLayer {
    pub weight: Tensor,
    pub bias: Tensor,
    pub stride: usize,
}

/// A plain stack of convolution layers.
#[derive(Clone, Debug)]
pub struct ConvNet {
    pub layers: Vec<ConvLayer>,
}

/// Which network a parameter belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NetId {
    Extractor,
    Head1,
    Head2,
    Discriminator,
}

/// Which classifier head.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Head {
    C1,
    C2,
}

/// Maps graph leaves back to bundle parameters for one recorded step.
#[derive(Default)]
pub struct Recorded {
    entries: Vec<(NetId, usize, bool, NodeId)>, // (net, layer, is_bias, node)
}

impl Recorded {
    pub fn nodes_for(&self, net: NetId) -> impl Iterator<Item = (usize, bool, NodeId)> + '_ {
        self.entries
            .iter()
            .filter(move |(n, _, _, _)| *n == net)
            .map(|&(_, layer, bias, id)| (layer, bias, id))
    }
}

/// Parameters and optimizer state of G, C1, C2 and D.
#[derive(Clone, Debug)]
pub struct ModelBundle {
    pub arch: ArchitectureConfig,
    pub seed: u64,
    pub iteration: u64,
    pub extractor: ConvNet,
    pub head1: ConvNet,
    pub head2: ConvNet,
    pub discriminator: ConvNet,
    pub opt_extractor: OptimizerState,
    pub opt_head1: OptimizerState,
    pub opt_head2: OptimizerState,
    pub opt_discriminator: OptimizerState,
}

/// Glorot-uniform bound for a conv weight.
fn init_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

fn init_conv(rng: &mut Rng, out_ch: usize, in_ch: usize, k: usize, stride: usize) -> ConvLayer {
    let bound = init_bound(in_ch * k * k, out_ch * k * k);
    let weight = Tensor::new(
        vec![out_ch, in_ch, k, k],
        (0..out_ch * in_ch * k * k)
            .map(|_| rng.uniform_in(-bound, bound))
            .collect(),
    )
    .expect("init shapes are consistent");
    ConvLayer {
        weight,
        bias: Tensor::zeros(vec![out_ch]),
        stride,
    }
}

/// Optimizer hyperparameters used when building a bundle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub momentum: f64,
    pub weight_decay: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            momentum: 0.9,
            weight_decay: 5e-4,
            adam_beta1: 0.9,
            adam_beta2: 0.99,
        }
    }
}

impl ModelBundle {
    /// Deterministically initializes all four networks. `C1` and `C2` share
    /// an architecture but draw from different sub-seeds, so their
    /// parameters always differ.
    pub fn build(arch: &ArchitectureConfig, opt: &OptimizerConfig, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng_g = Rng::new(derive(seed, 0));
        let mut rng_c1 = Rng::new(derive(seed, 1));
        let mut rng_c2 = Rng::new(derive(seed, 2));
        let mut rng_d = Rng::new(derive(seed, 3));

        let mut ext_layers = Vec::new();
        let mut in_ch = arch.in_channels;
        for _ in 0..arch.extractor_layers {
            ext_layers.push(init_conv(&mut rng_g, arch.feature_channels, in_ch, 3, 1));
            in_ch = arch.feature_channels;
        }

        let head = |rng: &mut Rng| ConvNet {
            layers: vec![init_conv(rng, arch.classes, arch.feature_channels, 1, 1)],
        };

        let mut disc_layers = Vec::new();
        let mut in_ch = arch.feature_channels;
        for &out_ch in &arch.discriminator_channels {
            disc_layers.push(init_conv(&mut rng_d, out_ch, in_ch, 4, 2));
            in_ch = out_ch;
        }

        Ok(ModelBundle {
            arch: arch.clone(),
            seed,
            iteration: 0,
            extractor: ConvNet { layers: ext_layers },
            head1: head(&mut rng_c1),
            head2: head(&mut rng_c2),
            discriminator: ConvNet {
                layers: disc_layers,
            },
            opt_extractor: OptimizerState::sgd(opt.momentum, opt.weight_decay),
            opt_head1: OptimizerState::sgd(opt.momentum, opt.weight_decay),
            opt_head2: OptimizerState::sgd(opt.momentum, opt.weight_decay),
            opt_discriminator: OptimizerState::adam(opt.adam_beta1, opt.adam_beta2),
        })
    }

    fn net(&self, id: NetId) -> &ConvNet {
        match id {
            NetId::Extractor => &self.extractor,
            NetId::Head1 => &self.head1,
            NetId::Head2 => &self.head2,
            NetId::Discriminator => &self.discriminator,
        }
    }

    fn net_mut(&mut self, id: NetId) -> &mut ConvNet {
        match id {
            NetId::Extractor => &mut self.extractor,
            NetId::Head1 => &mut self.head1,
            NetId::Head2 => &mut self.head2,
            NetId::Discriminator => &mut self.discriminator,
        }
    }

    /// Records a conv stack on the graph. When `trainable` is false the
    /// parameters enter as constants and backward never descends into them.
    fn record_net(
        &self,
        g: &mut Graph,
        net_id: NetId,
        mut x: NodeId,
        rec: &mut Recorded,
        trainable: bool,
        activation_after_each: bool,
        activate_last: bool,
    ) -> Result<NodeId> {
        let net = self.net(net_id);
        let last = net.layers.len() - 1;
        for (li, layer) in net.layers.iter().enumerate() {
            let (wi, bi) = if trainable {
                let wi = g.leaf(&layer.weight);
                let bi = g.leaf(&layer.bias);
                rec.entries.push((net_id, li, false, wi));
                rec.entries.push((net_id, li, true, bi));
                (wi, bi)
            } else {
                (g.constant(&layer.weight), g.constant(&layer.bias))
            };
            let c = g.conv2d(x, wi, layer.stride)?;
            x = g.add_bias(c, bi)?;
            if activation_after_each && (li != last || activate_last) {
                x = g.leaky_relu(x, self.arch.leaky_slope);
            }
        }
        Ok(x)
    }

    /// Extractor forward: x[C×H×W] → f[C_f×H×W].
    pub fn record_extractor(
        &self,
        g: &mut Graph,
        x: NodeId,
        rec: &mut Recorded,
        trainable: bool,
    ) -> Result<NodeId> {
        self.record_net(g, NetId::Extractor, x, rec, trainable, true, true)
    }

    /// Head forward: f → per-pixel class distribution p[K×H×W].
    pub fn record_head(
        &self,
        g: &mut Graph,
        head: Head,
        f: NodeId,
        rec: &mut Recorded,
        trainable: bool,
    ) -> Result<NodeId> {
        let id = match head {
            Head::C1 => NetId::Head1,
            Head::C2 => NetId::Head2,
        };
        let logits = self.record_net(g, id, f, rec, trainable, false, false)?;
        g.softmax_channels(logits)
    }

    /// Discriminator forward: f → domain score in (0,1).
    ///
    /// Per-patch logits are aggregated by mean before the sigmoid, giving
    /// one scalar per image.
    pub fn record_discriminator(
        &self,
        g: &mut Graph,
        f: NodeId,
        rec: &mut Recorded,
        trainable: bool,
    ) -> Result<NodeId> {
        let logits = self.record_net(g, NetId::Discriminator, f, rec, trainable, true, false)?;
        let mean_logit = g.mean(logits);
        Ok(g.sigmoid(mean_logit))
    }

    /// Pure inference: (p1, p2, f) for one image. Both heads consume the
    /// same feature tensor.
    pub fn forward_seg(&self, x: &Tensor) -> Result<(Tensor, Tensor, Tensor)> {
        let mut g = Graph::new();
        let mut rec = Recorded::default();
        let xi = g.constant(x);
        let f = self.record_extractor(&mut g, xi, &mut rec, false)?;
        let p1 = self.record_head(&mut g, Head::C1, f, &mut rec, false)?;
        let p2 = self.record_head(&mut g, Head::C2, f, &mut rec, false)?;
        Ok((
            Tensor::new(g.shape(p1).to_vec(), g.value(p1).to_vec())?,
            Tensor::new(g.shape(p2).to_vec(), g.value(p2).to_vec())?,
            Tensor::new(g.shape(f).to_vec(), g.value(f).to_vec())?,
        ))
    }

    /// Pure inference: D(G(x)) in (0,1).
    pub fn forward_domain(&self, x: &Tensor) -> Result<f64> {
        let mut g = Graph::new();
        let mut rec = Recorded::default();
        let xi = g.constant(x);
        let f = self.record_extractor(&mut g, xi, &mut rec, false)?;
        let d = self.record_discriminator(&mut g, f, &mut rec, false)?;
        Ok(g.scalar_value(d))
    }

    /// All trainable parameters of a head flattened in declaration order
    /// (per layer: weight then bias).
    pub fn weight_vector(&self, head: Head) -> Tensor {
        let net = match head {
            Head::C1 => &self.head1,
            Head::C2 => &self.head2,
        };
        let mut data = Vec::new();
        for layer in &net.layers {
            data.extend_from_slice(layer.weight.data());
            data.extend_from_slice(layer.bias.data());
        }
        let len = data.len();
        Tensor::new(vec![len], data).expect("parameters are finite")
    }

    /// Copies gradients from the recorded graph into the selected nets'
    /// parameter tensors.
    pub fn collect_grads(&mut self, g: &Graph, rec: &Recorded, nets: &[NetId]) -> Result<()> {
        for &net_id in nets {
            let entries: Vec<(usize, bool, NodeId)> = rec.nodes_for(net_id).collect();
            if entries.is_empty() {
                return Err(Error::contract(format!(
                    "no recorded parameters for {net_id:?}"
                )));
            }
            let net = self.net_mut(net_id);
            for (layer, is_bias, node) in entries {
                let t = if is_bias {
                    &mut net.layers[layer].bias
                } else {
                    &mut net.layers[layer].weight
                };
                g.grad_into(node, t)?;
            }
        }
        Ok(())
    }

    /// One optimizer step on a net whose gradients are populated.
    pub fn step_net(&mut self, net_id: NetId, lr: f64) -> Result<()> {
        let (net, opt) = match net_id {
            NetId::Extractor => (&mut self.extractor, &mut self.opt_extractor),
            NetId::Head1 => (&mut self.head1, &mut self.opt_head1),
            NetId::Head2 => (&mut self.head2, &mut self.opt_head2),
            NetId::Discriminator => (&mut self.discriminator, &mut self.opt_discriminator),
        };
        let mut params: Vec<&mut Tensor> = Vec::new();
        for layer in &mut net.layers {
            params.push(&mut layer.weight);
            params.push(&mut layer.bias);
        }
        optimizer_step(opt, &mut params, lr)
    }

    /// Drops any gradients left on a net's parameters.
    pub fn clear_net_grads(&mut self, net_id: NetId) {
        let net = self.net_mut(net_id);
        for layer in &mut net.layers {
            layer.weight.clear_grad();
            layer.bias.clear_grad();
        }
    }

    /// Canonical parameter order used by checkpoints: G, C1, C2, D; per
    /// layer weight then bias.
    fn all_params(&self) -> Vec<&Tensor> {
        let mut out = Vec::new();
        for net in [
            &self.extractor,
            &self.head1,
            &self.head2,
            &self.discriminator,
        ] {
            for layer in &net.layers {
                out.push(&layer.weight);
                out.push(&layer.bias);
            }
        }
        out
    }

    /// Checkpoint: length-prefixed JSON header (architecture, seed,
    /// iteration) followed by the parameters as concatenated CALT tensors.
    pub fn save_checkpoint<W: Write>(&self, w: &mut W) -> Result<()> {
        let header = serde_json::to_vec(&CheckpointHeader {
            arch: self.arch.clone(),
            seed: self.seed,
            iteration: self.iteration,
        })?;
        w.write_all(&(header.len() as u32).to_le_bytes())?;
        w.write_all(&header)?;
        for p in self.all_params() {
            p.write_calt(w)?;
        }
        Ok(())
    }

    pub fn load_checkpoint<R: Read>(r: &mut R, opt: &OptimizerConfig) -> Result<Self> {
        let mut len4 = [0u8; 4];
        r.read_exact(&mut len4)
            .map_err(|_| Error::format(0, "missing checkpoint header length"))?;
        let len = u32::from_le_bytes(len4) as usize;
        let mut header = vec![0u8; len];
        r.read_exact(&mut header)
            .map_err(|_| Error::format(4, "truncated checkpoint header"))?;
        let header: CheckpointHeader = serde_json::from_slice(&header)?;
        let mut bundle = ModelBundle::build(&header.arch, opt, header.seed)?;
        bundle.iteration = header.iteration;
        let mut offset = 4 + len as u64;
        for net_id in [
            NetId::Extractor,
            NetId::Head1,
            NetId::Head2,
            NetId::Discriminator,
        ] {
            let n_layers = bundle.net(net_id).layers.len();
            for li in 0..n_layers {
                for is_bias in [false, true] {
                    let t = Tensor::read_calt(r).map_err(|e| match e {
                        Error::Format { offset: o, message } => Error::format(offset + o, message),
                        other => other,
                    })?;
                    let numel = t.numel() as u64;
                    let rank = t.shape().len() as u64;
                    let net = bundle.net_mut(net_id);
                    let dst = if is_bias {
                        &mut net.layers[li].bias
                    } else {
                        &mut net.layers[li].weight
                    };
                    if dst.shape() != t.shape() {
                        return Err(Error::format(
                            offset,
                            format!(
                                "checkpoint tensor shape {:?} does not match architecture {:?}",
                                t.shape(),
                                dst.shape()
                            ),
                        ));
                    }
                    *dst = t;
                    offset += 10 + 4 * rank + 8 * numel;
                }
            }
        }
        Ok(bundle)
    }
}

#[derive(Serialize, Deserialize)]
struct CheckpointHeader {
    arch: ArchitectureConfig,
    seed: u64,
    iteration: u64,
}

/// Per-pixel argmax of a distribution map [K×H×W] → class-id map [H×W].
/// Ties break toward the lowest class id.
pub fn predict_labels(p: &Tensor) -> Result<Tensor> {
    let s = p.shape();
    if s.len() != 3 {
        return Err(Error::shape("predict_labels expects [K,H,W]"));
    }
    let (k, h, w) = (s[0], s[1], s[2]);
    let hw = h * w;
    let mut ids = vec![0.0f64; hw];
    let data = p.data();
    for pix in 0..hw {
        let mut best = 0usize;
        let mut best_v = data[pix];
        for c in 1..k {
            let v = data[c * hw + pix];
            if v > best_v {
                best_v = v;
                best = c;
            }
        }
        ids[pix] = best as f64;
    }
    Tensor::new(vec![h, w], ids)
}

/// One-hot encoding of a class-id map [H×W] → [K×H×W].
pub fn one_hot(ids: &Tensor, k: usize) -> Result<Tensor> {
    let s = ids.shape();
    if s.len() != 2 {
        return Err(Error::shape("one_hot expects [H,W]"));
    }
    let hw = s[0] * s[1];
    let mut data = vec![0.0f64; k * hw];
    for (pix, &id) in ids.data().iter().enumerate() {
        let c = id as usize;
        if c >= k {
            return Err(Error::contract(format!(
                "class id {c} out of range (K={k})"
            )));
        }
        data[c * hw + pix] = 1.0;
    }
    Tensor::new(vec![k, s[0], s[1]], data)
}
