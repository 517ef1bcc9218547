//! The receding-horizon visual planner.

mod camera;
mod cost;
mod field;
mod geometry;
mod primitives;

pub use camera::{project_primitives, project_to_image, CameraModel};
pub use cost::{collision_cost, select_primitive, target_cost, CostBreakdown};
pub use field::{
    edf, edf_brute_force, extract_boundary, sedf, write_mask_pgm, write_pgm16, BinaryMask,
    DistanceField,
};
pub use geometry::{se3_distance, Pose};
pub use primitives::{generate_primitives, unicycle_pose, Primitive};

use serde::{Deserialize, Serialize};

/// Everything the planner needs besides the mask and the goal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlannerConfig {
    /// Library size; angular rates are evenly spaced over ±omega_max.
    pub n_primitives: usize,
    /// Linear speed of every primitive (m/s).
    pub linear_velocity: f64,
    /// Maximum angular rate magnitude (rad/s).
    pub omega_max: f64,
    /// Primitive horizon (s).
    pub horizon: f64,
    /// Poses sampled per primitive.
    pub samples_per_primitive: usize,
    /// Distance-field scale factor.
    pub alpha: f64,
    /// Row gate for strong obstacle boundaries, as a fraction of image
    /// height; only boundary pixels below the gate feed the field.
    pub v_thres_frac: f64,
    /// Collision-cost weight.
    pub w1: f64,
    /// Target-cost weight.
    pub w2: f64,
    /// Rotation weight inside the pose distance.
    pub a: f64,
    /// Translation weight inside the pose distance.
    pub b: f64,
    /// Score clearance itself instead of normalized risk (the published
    /// formula; it rewards hugging obstacles and exists for study).
    pub literal_eq25: bool,
    pub camera: CameraModel,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            n_primitives: 11,
            linear_velocity: 0.3,
            omega_max: 0.6,
            horizon: 3.0,
            samples_per_primitive: 8,
            alpha: 0.5,
            v_thres_frac: 0.4,
            w1: 1.0,
            w2: 0.05,
            a: 0.1,
            b: 1.0,
            literal_eq25: false,
            camera: CameraModel::default(),
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> cali_core::Result<()> {
        use cali_core::Error;
        if self.n_primitives == 0 || self.samples_per_primitive < 2 {
            return Err(Error::config(
                "need at least one primitive and two samples per primitive",
            ));
        }
        if !(self.alpha >= 0.0 && self.alpha <= 1.0) {
            return Err(Error::config("alpha must lie in [0, 1]"));
        }
        if !(self.a > 0.0 && self.b > 0.0) {
            return Err(Error::config("pose-distance weights must be positive"));
        }
        if self.linear_velocity <= 0.0 || self.horizon <= 0.0 {
            return Err(Error::config("velocity and horizon must be positive"));
        }
        if !(0.0..=1.0).contains(&self.v_thres_frac) {
            return Err(Error::config("v_thres_frac must lie in [0, 1]"));
        }
        self.camera.validate()
    }

    /// The boundary row gate in pixels.
    pub fn v_thres(&self) -> usize {
        (self.v_thres_frac * self.camera.image_height as f64) as usize
    }
}
