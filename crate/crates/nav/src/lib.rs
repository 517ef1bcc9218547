//! Segmentation-driven visual navigation: a receding-horizon planner that
//! evaluates motion primitives directly in image space, and a closed-loop
//! 2D simulator that feeds it.
//!
//! The planner never builds a map. Each cycle it takes a binary
//! navigability mask, extracts the near-field obstacle boundary, turns it
//! into a scaled Euclidean distance field, projects a motion-primitive
//! library into the image, and picks the primitive minimizing a weighted
//! sum of collision risk and pose distance to the goal.

pub mod navsim;
pub mod planner;

pub use cali_core::error::{Error, Result};
