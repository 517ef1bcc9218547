//! Parameter-update rules and the poly learning-rate schedule.

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Per-network optimizer state. Buffers are allocated lazily on the first
/// step and must keep matching the parameter shapes thereafter.
#[derive(Clone, Debug)]
pub enum OptimizerState {
    /// v ← momentum·v + (g + weight_decay·p);  p ← p − lr·v
    SgdMomentum {
        momentum: f64,
        weight_decay: f64,
        velocity: Vec<Vec<f64>>,
    },
    /// Bias-corrected adaptive moments:
    /// m ← β1·m + (1−β1)·g;  v ← β2·v + (1−β2)·g²;
    /// p ← p − lr·m̂/(√v̂ + 1e-8)
    AdaptiveMoments {
        beta1: f64,
        beta2: f64,
        step: u64,
        first: Vec<Vec<f64>>,
        second: Vec<Vec<f64>>,
    },
}

impl OptimizerState {
    pub fn sgd(momentum: f64, weight_decay: f64) -> Self {
        OptimizerState::SgdMomentum {
            momentum,
            weight_decay,
            velocity: Vec::new(),
        }
    }

    pub fn adam(beta1: f64, beta2: f64) -> Self {
        OptimizerState::AdaptiveMoments {
            beta1,
            beta2,
            step: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }
}

const ADAM_EPS: f64 = 1e-8;

/// Applies one update to `params` from their populated gradients, then
/// clears the gradients. A missing gradient is a contract error.
pub fn optimizer_step(
    state: &mut OptimizerState,
    params: &mut [&mut Tensor],
    lr: f64,
) -> Result<()> {
    for (i, p) in params.iter().enumerate() {
        if p.grad().is_none() {
            return Err(Error::contract(format!(
                "optimizer_step: parameter {i} has no gradient"
            )));
        }
    }
    match state {
        OptimizerState::SgdMomentum {
            momentum,
            weight_decay,
            velocity,
        } => {
            if velocity.is_empty() {
                *velocity = params.iter().map(|p| vec![0.0; p.numel()]).collect();
            }
            if velocity.len() != params.len() {
                return Err(Error::contract(
                    "optimizer_step: parameter count changed since first step",
                ));
            }
            for (p, v) in params.iter_mut().zip(velocity.iter_mut()) {
                if v.len() != p.numel() {
                    return Err(Error::contract("optimizer buffer shape mismatch"));
                }
                let grad = p.grad().unwrap().to_vec();
                let data = p.data_mut();
                for ((x, vel), g) in data.iter_mut().zip(v.iter_mut()).zip(&grad) {
                    let g = g + *weight_decay * *x;
                    *vel = *momentum * *vel + g;
                    *x -= lr * *vel;
                }
                p.clear_grad();
            }
        }
        OptimizerState::AdaptiveMoments {
            beta1,
            beta2,
            step,
            first,
            second,
        } => {
            if first.is_empty() {
                *first = params.iter().map(|p| vec![0.0; p.numel()]).collect();
                *second = params.iter().map(|p| vec![0.0; p.numel()]).collect();
            }
            if first.len() != params.len() {
                return Err(Error::contract(
                    "optimizer_step: parameter count changed since first step",
                ));
            }
            *step += 1;
            let bc1 = 1.0 - beta1.powi(*step as i32);
            let bc2 = 1.0 - beta2.powi(*step as i32);
            for ((p, m), v) in params.iter_mut().zip(first.iter_mut()).zip(second.iter_mut()) {
                if m.len() != p.numel() {
                    return Err(Error::contract("optimizer buffer shape mismatch"));
                }
                let grad = p.grad().unwrap().to_vec();
                let data = p.data_mut();
                for (((x, mi), vi), g) in
                    data.iter_mut().zip(m.iter_mut()).zip(v.iter_mut()).zip(&grad)
                {
                    *mi = *beta1 * *mi + (1.0 - *beta1) * g;
                    *vi = *beta2 * *vi + (1.0 - *beta2) * g * g;
                    let mhat = *mi / bc1;
                    let vhat = *vi / bc2;
                    *x -= lr * mhat / (vhat.sqrt() + ADAM_EPS);
                }
                p.clear_grad();
            }
        }
    }
    Ok(())
}

/// base_lr · (1 − iter/max_iters)^power
pub fn poly_lr(base_lr: f64, iter: u64, max_iters: u64, power: f64) -> Result<f64> {
    if max_iters == 0 {
        return Err(Error::contract("poly_lr: max_iters must be positive"));
    }
    if iter > max_iters {
        return Err(Error::contract(format!(
            "poly_lr: iter {iter} exceeds max_iters {max_iters}"
        )));
    }
    Ok(base_lr * (1.0 - iter as f64 / max_iters as f64).powf(power))
}
