//! Motion-primitive library: closed-form unicycle arcs.

use super::geometry::Pose;
use serde::{Deserialize, Serialize};

/// A time-sampled unicycle arc in the robot frame, with image-plane
/// projections filled in by the camera model.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Primitive {
    pub v: f64,
    pub omega: f64,
    pub horizon: f64,
    /// m ≥ 2 poses at times i·T/(m−1), starting at the origin.
    pub poses: Vec<Pose>,
    /// Per-pose pixel coordinates; `None` when the pose is out of view.
    pub image_points: Vec<Option<(f64, f64)>>,
}

/// Exact unicycle state after driving (v, ω) for time t from the origin.
pub fn unicycle_pose(v: f64, omega: f64, t: f64) -> Pose {
    if omega.abs() < 1e-12 {
        Pose::new(v * t, 0.0, 0.0)
    } else {
        let r = v / omega;
        Pose::new(r * (omega * t).sin(), r * (1.0 - (omega * t).cos()), omega * t)
    }
}

/// Builds `n` primitives with angular rates evenly spaced over
/// [−omega_max, omega_max] (a single primitive drives straight).
pub fn generate_primitives(n: usize, v: f64, omega_max: f64, horizon: f64, m: usize) -> Vec<Primitive> {
    assert!(n >= 1 && m >= 2, "need n >= 1 primitives and m >= 2 samples");
    (0..n)
        .map(|i| {
            // (2i − (n−1))/(n−1) is an exact ratio of small integers, so
            // opposite library entries carry exactly negated rates
            let omega = if n == 1 {
                0.0
            } else {
                omega_max * (2.0 * i as f64 - (n - 1) as f64) / (n - 1) as f64
            };
            let poses = (0..m)
                .map(|j| unicycle_pose(v, omega, horizon * j as f64 / (m - 1) as f64))
                .collect();
            Primitive {
                v,
                omega,
                horizon,
                poses,
                image_points: vec![None; m],
            }
        })
        .collect()
}
