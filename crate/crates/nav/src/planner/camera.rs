//! Pinhole camera on a pitched mount, projecting ground-plane poses into
//! the image.
//!
//! Frames: the robot frame has x forward, y left, z up, with the camera at
//! height `height` above the origin, pitched down by `pitch` about the
//! robot y-axis. The camera frame is the usual computer-vision one
//! (z forward, x right, y down). Pixel (u, v) has u growing rightward and
//! v growing downward; v is the row coordinate.

use super::geometry::Pose;
use super::primitives::Primitive;
use cali_core::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    /// Mount height above the ground plane (m).
    pub height: f64,
    /// Downward pitch (rad); must keep the ground plane visible.
    pub pitch: f64,
    pub image_width: usize,
    pub image_height: usize,
}

impl Default for CameraModel {
    fn default() -> Self {
        CameraModel {
            fx: 50.0,
            fy: 50.0,
            cx: 31.5,
            cy: 23.5,
            height: 0.5,
            pitch: 0.45,
            image_width: 64,
            image_height: 48,
        }
    }
}

impl CameraModel {
    pub fn validate(&self) -> Result<()> {
        if self.fx <= 0.0 || self.fy <= 0.0 {
            return Err(Error::config("focal lengths must be positive"));
        }
        if self.height <= 0.0 {
            return Err(Error::config("camera height must be positive"));
        }
        if self.image_width == 0 || self.image_height == 0 {
            return Err(Error::config("image size must be positive"));
        }
        if !(self.pitch > 0.0 && self.pitch < std::f64::consts::FRAC_PI_2) {
            return Err(Error::config(
                "pitch must be in (0, π/2) so the ground plane is visible",
            ));
        }
        Ok(())
    }

    /// Camera basis vectors expressed in the robot frame.
    fn basis(&self) -> ([f64; 3], [f64; 3], [f64; 3]) {
        let (sp, cp) = self.pitch.sin_cos();
        let z_cam = [cp, 0.0, -sp]; // optical axis, pitched down
        let x_cam = [0.0, -1.0, 0.0]; // image right = robot right
        let y_cam = [-sp, 0.0, -cp]; // image down
        (x_cam, y_cam, z_cam)
    }

    /// Projects a robot-frame ground point to pixel coordinates.
    fn project_point(&self, px: f64, py: f64) -> Option<(f64, f64)> {
        let (x_cam, y_cam, z_cam) = self.basis();
        let d = [px, py, -self.height]; // from camera center to the point
        let xc = d[0] * x_cam[0] + d[1] * x_cam[1] + d[2] * x_cam[2];
        let yc = d[0] * y_cam[0] + d[1] * y_cam[1] + d[2] * y_cam[2];
        let zc = d[0] * z_cam[0] + d[1] * z_cam[1] + d[2] * z_cam[2];
        if zc <= 1e-9 {
            return None; // behind the camera
        }
        let u = self.cx + self.fx * xc / zc;
        let v = self.cy + self.fy * yc / zc;
        let in_view = u >= 0.0 && u <= (self.image_width - 1) as f64 && v >= 0.0
            && v <= (self.image_height - 1) as f64;
        in_view.then_some((u, v))
    }

    /// Casts the ray of pixel (u, v) onto the ground plane, returning the
    /// hit point in the robot frame. `None` when the ray never descends.
    pub fn pixel_to_ground(&self, u: f64, v: f64) -> Option<(f64, f64)> {
        let (x_cam, y_cam, z_cam) = self.basis();
        let dx = (u - self.cx) / self.fx;
        let dy = (v - self.cy) / self.fy;
        // ray direction in robot frame
        let d = [
            dx * x_cam[0] + dy * y_cam[0] + z_cam[0],
            dx * x_cam[1] + dy * y_cam[1] + z_cam[1],
            dx * x_cam[2] + dy * y_cam[2] + z_cam[2],
        ];
        if d[2] >= -1e-12 {
            return None; // at or above the horizon
        }
        let t = self.height / -d[2];
        Some((t * d[0], t * d[1]))
    }
}

/// Projects one robot-frame pose onto the image plane; `None` when the
/// ground point is behind the camera or outside the image bounds.
pub fn project_to_image(p: &Pose, cam: &CameraModel) -> Option<(f64, f64)> {
    cam.project_point(p.x, p.y)
}

/// Fills in the image points of every primitive in the library.
pub fn project_primitives(lib: &mut [Primitive], cam: &CameraModel) {
    for prim in lib {
        prim.image_points = prim
            .poses
            .iter()
            .map(|p| project_to_image(p, cam))
            .collect();
    }
}
