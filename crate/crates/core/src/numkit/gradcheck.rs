//! Central-finite-difference gradient verification.

use super::graph::{Graph, NodeId};
use super::rng::Rng;
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Compares analytic gradients against central finite differences.
///
/// `build` records the scalar loss from graph leaves created for each
/// tensor in `params` (in order). Up to `samples_per_param` coordinates of
/// each parameter are probed (chosen by the seeded rng when a parameter has
/// more elements than that). Returns the maximum of
/// `|analytic − numeric| / max(1, |analytic|)` over all probed coordinates.
pub fn grad_check<F>(
    params: &[Tensor],
    eps: f64,
    samples_per_param: usize,
    seed: u64,
    build: F,
) -> Result<f64>
where
    F: Fn(&mut Graph, &[NodeId]) -> Result<NodeId>,
{
    if !(1e-7..=1e-3).contains(&eps) {
        return Err(Error::contract(format!(
            "grad_check: eps {eps} outside [1e-7, 1e-3]"
        )));
    }

    // Analytic pass.
    let mut g = Graph::new();
    let ids: Vec<NodeId> = params.iter().map(|p| g.leaf(p)).collect();
    let loss = build(&mut g, &ids)?;
    g.backward(loss)?;
    let analytic: Vec<Vec<f64>> = ids
        .iter()
        .map(|&id| g.grad(id).map(|s| s.to_vec()).unwrap_or_default())
        .collect();

    let eval = |work: &[Tensor]| -> Result<f64> {
        let mut g = Graph::new();
        let ids: Vec<NodeId> = work.iter().map(|p| g.leaf(p)).collect();
        let loss = build(&mut g, &ids)?;
        Ok(g.scalar_value(loss))
    };

    let mut work: Vec<Tensor> = params.to_vec();
    let mut rng = Rng::new(seed);
    let mut max_rel = 0.0f64;
    for (pi, p) in params.iter().enumerate() {
        let n = p.numel();
        let indices: Vec<usize> = if n <= samples_per_param {
            (0..n).collect()
        } else {
            (0..samples_per_param).map(|_| rng.index(n)).collect()
        };
        for idx in indices {
            let orig = work[pi].at(idx);
            work[pi].data_mut()[idx] = orig + eps;
            let f_plus = eval(&work)?;
            work[pi].data_mut()[idx] = orig - eps;
            let f_minus = eval(&work)?;
            work[pi].data_mut()[idx] = orig;

            let numeric = (f_plus - f_minus) / (2.0 * eps);
            let a = analytic
                .get(pi)
                .and_then(|v| v.get(idx).copied())
                .unwrap_or(0.0);
            let rel = (a - numeric).abs() / a.abs().max(1.0);
            if rel > max_rel {
                max_rel = rel;
            }
        }
    }
    Ok(max_rel)
}
