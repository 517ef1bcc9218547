//! Shared gradient-check harness: every training objective composed with
//! the desk-scale networks, verified against central finite differences.

use cali_core::losses;
use cali_core::models::{ArchitectureConfig, ModelBundle, OptimizerConfig};
use cali_core::numkit::rng::Rng;
use cali_core::numkit::{grad_check, Graph, NodeId, Tensor};

/// Rebuilds the forward passes a loss needs from the flat leaf list.
struct Forward<'a> {
    arch: &'a ArchitectureConfig,
}

impl Forward<'_> {
    /// Leaves are declared in canonical order: extractor (w,b) per layer,
    /// head1, head2, discriminator.
    fn extractor(&self, g: &mut Graph, ids: &[NodeId], x: &Tensor) -> NodeId {
        let xi = g.constant(x);
        let mut f = xi;
        for li in 0..self.arch.extractor_layers {
            let (w, b) = (ids[2 * li], ids[2 * li + 1]);
            let c = g.conv2d(f, w, 1).unwrap();
            let cb = g.add_bias(c, b).unwrap();
            f = g.leaky_relu(cb, self.arch.leaky_slope);
        }
        f
    }

    fn head(&self, g: &mut Graph, ids: &[NodeId], f: NodeId, which: usize) -> NodeId {
        let base = 2 * self.arch.extractor_layers + 2 * which;
        let c = g.conv2d(f, ids[base], 1).unwrap();
        let cb = g.add_bias(c, ids[base + 1]).unwrap();
        g.softmax_channels(cb).unwrap()
    }

    fn discriminator(&self, g: &mut Graph, ids: &[NodeId], f: NodeId) -> NodeId {
        let base = 2 * self.arch.extractor_layers + 4;
        let n = self.arch.discriminator_channels.len();
        let mut d = f;
        for li in 0..n {
            let c = g.conv2d(d, ids[base + 2 * li], 2).unwrap();
            let cb = g.add_bias(c, ids[base + 2 * li + 1]).unwrap();
            d = if li + 1 < n {
                g.leaky_relu(cb, self.arch.leaky_slope)
            } else {
                cb
            };
        }
        let mean_logit = g.mean(d);
        g.sigmoid(mean_logit)
    }
}

/// Gradient-check every loss through a bundle built from `seed`, at a
/// given spatial size. Returns (loss name, max rel err) pairs.
pub fn check_all_losses(seed: u64, hw: usize, samples: usize) -> Vec<(&'static str, f64)> {
    let arch = ArchitectureConfig::default();
    let bundle = ModelBundle::build(&arch, &OptimizerConfig::default(), seed).unwrap();
    let mut rng = Rng::new(seed ^ 0x5EED);
    let n_ch = arch.in_channels;
    let mut image = |rng: &mut Rng, shift: f64| {
        Tensor::new(
            vec![n_ch, hw, hw],
            (0..n_ch * hw * hw)
                .map(|_| rng.normal() * 0.5 + shift)
                .collect(),
        )
        .unwrap()
    };
    let x = image(&mut rng, 0.0);
    let x2 = image(&mut rng, 0.3);
    let y = {
        let n = hw * hw;
        let k = arch.classes;
        let mut data = vec![0.0; k * n];
        for pix in 0..n {
            data[rng.index(k) * n + pix] = 1.0;
        }
        Tensor::new(vec![k, hw, hw], data).unwrap()
    };

    let params: Vec<Tensor> = [
        &bundle.extractor,
        &bundle.head1,
        &bundle.head2,
        &bundle.discriminator,
    ]
    .iter()
    .flat_map(|net| {
        net.layers
            .iter()
            .flat_map(|l| [l.weight.clone(), l.bias.clone()])
    })
    .collect();

    let fwd = Forward { arch: &arch };
    let mut results = Vec::new();

    let err = grad_check(&params, 1e-5, samples, seed, |g, ids| {
        let f = fwd.extractor(g, ids, &x);
        let p1 = fwd.head(g, ids, f, 0);
        let p2 = fwd.head(g, ids, f, 1);
        losses::seg_loss(g, p1, p2, &y)
    })
    .unwrap();
    results.push(("seg_loss", err));

    let err = grad_check(&params, 1e-5, samples, seed, |g, ids| {
        let fs = fwd.extractor(g, ids, &x);
        let ft = fwd.extractor(g, ids, &x2);
        let d_src = fwd.discriminator(g, ids, fs);
        let d_tgt = fwd.discriminator(g, ids, ft);
        losses::domain_loss(g, d_src, d_tgt)
    })
    .unwrap();
    results.push(("domain_loss", err));

    let err = grad_check(&params, 1e-5, samples, seed, |g, ids| {
        let f = fwd.extractor(g, ids, &x2);
        let p1 = fwd.head(g, ids, f, 0);
        let p2 = fwd.head(g, ids, f, 1);
        losses::class_alignment_loss(g, p1, p2)
    })
    .unwrap();
    results.push(("class_alignment_loss", err));

    let err = grad_check(&params, 1e-5, samples, seed, |g, ids| {
        let base = 2 * arch.extractor_layers;
        let w1 = g.concat(&[ids[base], ids[base + 1]]);
        let w2 = g.concat(&[ids[base + 2], ids[base + 3]]);
        losses::weight_regularization(g, w1, w2)
    })
    .unwrap();
    results.push(("weight_regularization", err));

    let err = grad_check(&params, 1e-5, samples, seed, |g, ids| {
        let f = fwd.extractor(g, ids, &x);
        let p1 = fwd.head(g, ids, f, 0);
        losses::mixed_loss(g, p1, &y)
    })
    .unwrap();
    results.push(("mixed_loss", err));

    results
}
