//! First-person navigability rendering.

use super::world::World;
use crate::planner::{BinaryMask, CameraModel, Pose};

/// Renders the ground-truth navigability mask seen from a pose: each
/// pixel's ray is cast onto the ground plane and the hit point is checked
/// against the world. Pixels at or above the horizon, outside the bounds,
/// or on an obstacle disk are non-navigable. Deterministic in all inputs.
pub fn render_segmentation(world: &World, pose: &Pose, cam: &CameraModel) -> BinaryMask {
    let mut mask = BinaryMask::new(cam.image_width, cam.image_height, false);
    let (s, c) = pose.psi.sin_cos();
    for v in 0..cam.image_height {
        for u in 0..cam.image_width {
            if let Some((lx, ly)) = cam.pixel_to_ground(u as f64, v as f64) {
                let wx = pose.x + c * lx - s * ly;
                let wy = pose.y + s * lx + c * ly;
                if world.navigable(wx, wy, 0.0) {
                    mask.set(u, v, true);
                }
            }
        }
    }
    mask
}
