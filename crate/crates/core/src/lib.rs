//! Coarse-to-fine adversarial domain adaptation on synthetic segmentation
//! domains, built on a minimal dense-tensor autodiff kernel.
//!
//! The crate is organized around the training pipeline:
//!
//! - [`numkit`]: dense f64 tensors, a reverse-mode graph, optimizers and the
//!   poly learning-rate schedule.
//! - [`models`]: the four networks of the pseudo-trilateral structure — a
//!   shared extractor `G`, two classifier heads `C1`/`C2` and a domain
//!   discriminator `D`.
//! - [`losses`]: every training objective (supervised segmentation, domain
//!   adversarial value, classifier discrepancy, weight regularization, mixed
//!   supervision) as pure graph builders.
//! - [`divergence`]: empirical H-divergence estimation plus brute-force
//!   oracles over enumerable hypothesis classes.
//! - [`synthdata`]: procedural two-domain segmentation datasets with
//!   controllable appearance and label shift.
//! - [`trainer`]: the alternating domain/class alignment loop with the
//!   `so`/`da`/`ca`/`cali`/`icali` methods and the wrong-order ablation.
//! - [`evalkit`]: confusion matrices, per-class IoU and mIoU, target
//!   discrepancy tracking.

pub mod divergence;
pub mod error;
pub mod evalkit;
pub mod losses;
pub mod models;
pub mod numkit;
pub mod synthdata;
pub mod trainer;

pub use error::{Error, Result};
