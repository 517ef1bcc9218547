//! Minimal dense-tensor numeric kernel: reverse-mode autodiff over a
//! recorded graph, SGD-with-momentum and adaptive-moment optimizers, the
//! poly learning-rate schedule, and a finite-difference gradient checker.
//!
//! Everything is 64-bit; all randomness flows through the seeded
//! [`rng::Rng`] so results are bit-reproducible.

mod gradcheck;
mod graph;
mod io;
mod kernels;
mod optim;
pub mod rng;
mod tensor;

pub use gradcheck::grad_check;
pub use graph::{Graph, NodeId};
pub use optim::{optimizer_step, poly_lr, OptimizerState};
pub use tensor::Tensor;

/// Lower clamp applied inside every logarithm recorded on the graph.
/// Network outputs can numerically reach 0, and the losses take logs of
/// them; the clamp keeps every loss finite.
pub const LOG_CLAMP: f64 = 1e-12;
