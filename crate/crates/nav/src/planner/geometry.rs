//! Planar poses and the pose distance used as the target cost.

use cali_core::{Error, Result};
use serde::{Deserialize, Serialize};

/// A planar robot pose; the heading is kept normalized to (−π, π].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub psi: f64,
}

/// Wraps an angle into (−π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut r = a % two_pi;
    if r <= -std::f64::consts::PI {
        r += two_pi;
    } else if r > std::f64::consts::PI {
        r -= two_pi;
    }
    r
}

impl Pose {
    pub fn new(x: f64, y: f64, psi: f64) -> Self {
        Pose {
            x,
            y,
            psi: wrap_angle(psi),
        }
    }

    pub fn origin() -> Self {
        Pose {
            x: 0.0,
            y: 0.0,
            psi: 0.0,
        }
    }

    /// Expresses `other` (given in the same world frame as `self`) in this
    /// pose's local frame.
    pub fn to_local(&self, other: &Pose) -> Pose {
        let (dx, dy) = (other.x - self.x, other.y - self.y);
        let (s, c) = self.psi.sin_cos();
        Pose::new(
            c * dx + s * dy,
            -s * dx + c * dy,
            wrap_angle(other.psi - self.psi),
        )
    }

    /// Composes a local-frame pose into the world frame of `self`.
    pub fn from_local(&self, local: &Pose) -> Pose {
        let (s, c) = self.psi.sin_cos();
        Pose::new(
            self.x + c * local.x - s * local.y,
            self.y + s * local.x + c * local.y,
            wrap_angle(self.psi + local.psi),
        )
    }

    pub fn distance_xy(&self, other: &Pose) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }
}

/// Weighted pose distance between two planar transforms:
/// sqrt(a·θ² + b·‖t1 − t2‖²), where θ is the geodesic rotation angle —
/// for yaw-only rotations the rotation-matrix logarithm has magnitude
/// |wrap(ψ2 − ψ1)| ∈ [0, π].
pub fn se3_distance(t1: &Pose, t2: &Pose, a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::contract("se3_distance weights must be positive"));
    }
    let theta = wrap_angle(t2.psi - t1.psi).abs();
    let dt2 = (t1.x - t2.x).powi(2) + (t1.y - t2.y).powi(2);
    Ok((a * theta * theta + b * dt2).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn identity_distance_zero() {
        let p = Pose::new(1.0, 2.0, 0.5);
        assert_eq!(se3_distance(&p, &p, 0.5, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn quarter_turn_same_position() {
        let p1 = Pose::new(1.0, 1.0, 0.0);
        let p2 = Pose::new(1.0, 1.0, PI / 2.0);
        let d = se3_distance(&p1, &p2, 1.0, 1.0).unwrap();
        assert!((d - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn translation_three_four_five() {
        let p1 = Pose::new(0.0, 0.0, 0.7);
        let p2 = Pose::new(3.0, 4.0, 0.7);
        for a in [0.1, 1.0, 10.0] {
            let d = se3_distance(&p1, &p2, a, 1.0).unwrap();
            assert!((d - 5.0).abs() < 1e-12, "a={a}: {d}");
        }
    }

    #[test]
    fn non_positive_weights_rejected() {
        let p = Pose::origin();
        assert!(se3_distance(&p, &p, 0.0, 1.0).is_err());
        assert!(se3_distance(&p, &p, 1.0, -1.0).is_err());
    }

    #[test]
    fn symmetric_and_triangle_inequality_on_sampled_triples() {
        let mut rng = cali_core::numkit::rng::Rng::new(17);
        for _ in 0..2000 {
            let rand_pose = |rng: &mut cali_core::numkit::rng::Rng| {
                Pose::new(
                    rng.uniform_in(-5.0, 5.0),
                    rng.uniform_in(-5.0, 5.0),
                    rng.uniform_in(-PI, PI),
                )
            };
            let (p, q, r) = (rand_pose(&mut rng), rand_pose(&mut rng), rand_pose(&mut rng));
            let (a, b) = (rng.uniform_in(0.1, 3.0), rng.uniform_in(0.1, 3.0));
            let dpq = se3_distance(&p, &q, a, b).unwrap();
            let dqp = se3_distance(&q, &p, a, b).unwrap();
            assert!((dpq - dqp).abs() < 1e-12);
            let dqr = se3_distance(&q, &r, a, b).unwrap();
            let dpr = se3_distance(&p, &r, a, b).unwrap();
            assert!(dpr <= dpq + dqr + 1e-9, "triangle violated");
        }
    }

    #[test]
    fn zero_iff_equal_pose() {
        let p = Pose::new(0.3, -0.2, 1.1);
        let q = Pose::new(0.3, -0.2, 1.1 + 1e-6);
        assert!(se3_distance(&p, &q, 1.0, 1.0).unwrap() > 0.0);
    }

    #[test]
    fn local_frame_round_trip() {
        let base = Pose::new(2.0, -1.0, 0.8);
        let world = Pose::new(3.5, 0.7, -2.0);
        let local = base.to_local(&world);
        let back = base.from_local(&local);
        assert!((back.x - world.x).abs() < 1e-12);
        assert!((back.y - world.y).abs() < 1e-12);
        assert!(wrap_angle(back.psi - world.psi).abs() < 1e-12);
    }

    #[test]
    fn wrap_angle_boundaries() {
        assert_eq!(wrap_angle(PI), PI);
        assert_eq!(wrap_angle(-PI), PI);
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!(wrap_angle(0.0).abs() < 1e-15);
    }
}
