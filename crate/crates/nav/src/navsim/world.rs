//! Synthetic worlds: a rectangular arena with circular obstacles.

use crate::planner::Pose;
use cali_core::numkit::rng::{derive, Rng};
use cali_core::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Disk {
    pub cx: f64,
    pub cy: f64,
    pub r: f64,
}

impl Disk {
    pub fn contains(&self, x: f64, y: f64, inflate: f64) -> bool {
        let (dx, dy) = (x - self.cx, y - self.cy);
        dx * dx + dy * dy < (self.r + inflate) * (self.r + inflate)
    }
}

/// A navigation scene. Bounds are (xmin, ymin, xmax, ymax).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct World {
    pub bounds: (f64, f64, f64, f64),
    pub obstacles: Vec<Disk>,
    pub start: Pose,
    pub goal: Pose,
    pub seed: u64,
}

impl World {
    pub fn validate(&self) -> Result<()> {
        let (x0, y0, x1, y1) = self.bounds;
        if !(x1 > x0 && y1 > y0) {
            return Err(Error::config("world bounds are degenerate"));
        }
        for p in [&self.start, &self.goal] {
            if !self.in_bounds(p.x, p.y) {
                return Err(Error::config("start and goal must lie inside the bounds"));
            }
            if self.obstacles.iter().any(|d| d.contains(p.x, p.y, 0.0)) {
                return Err(Error::config("start and goal must be obstacle-free"));
            }
        }
        Ok(())
    }

    pub fn in_bounds(&self, x: f64, y: f64) -> bool {
        let (x0, y0, x1, y1) = self.bounds;
        x >= x0 && x <= x1 && y >= y0 && y <= y1
    }

    /// Navigable for the robot center: inside the bounds and clear of all
    /// obstacles inflated by `inflate`.
    pub fn navigable(&self, x: f64, y: f64, inflate: f64) -> bool {
        self.in_bounds(x, y) && !self.obstacles.iter().any(|d| d.contains(x, y, inflate))
    }

    /// Obstacle-free arena, goal straight ahead.
    pub fn empty() -> World {
        World {
            bounds: (0.0, 0.0, 10.0, 10.0),
            obstacles: Vec::new(),
            start: Pose::new(1.0, 5.0, 0.0),
            goal: Pose::new(9.0, 5.0, 0.0),
            seed: 0,
        }
    }

    /// Seeded benchmark world: 3–5 scattered disks between start and goal,
    /// placed so a corridor always survives.
    pub fn benchmark(seed: u64) -> World {
        let mut rng = Rng::new(derive(seed, 0x80B5));
        let start = Pose::new(1.0, 5.0, 0.0);
        let goal = Pose::new(9.0, 5.0, 0.0);
        let n = 3 + rng.index(3);
        let mut obstacles: Vec<Disk> = Vec::new();
        let mut attempts = 0;
        while obstacles.len() < n && attempts < 400 {
            attempts += 1;
            let d = Disk {
                cx: rng.uniform_in(2.8, 7.2),
                cy: rng.uniform_in(2.0, 8.0),
                r: rng.uniform_in(0.45, 0.7),
            };
            let clear_of_endpoints = !d.contains(start.x, start.y, 1.5)
                && !d.contains(goal.x, goal.y, 1.5);
            let clear_of_others = obstacles
                .iter()
                .all(|o| ((o.cx - d.cx).powi(2) + (o.cy - d.cy).powi(2)).sqrt() > o.r + d.r + 1.6);
            if clear_of_endpoints && clear_of_others {
                obstacles.push(d);
            }
        }
        World {
            bounds: (0.0, 0.0, 10.0, 10.0),
            obstacles,
            start,
            goal,
            seed,
        }
    }

    /// A wall of disks across the arena with a single gap at a seeded
    /// height; the goal sits behind the wall.
    pub fn wall_gap(seed: u64) -> World {
        let mut rng = Rng::new(derive(seed, 0x9A11));
        let gap_center = rng.uniform_in(3.0, 7.0);
        let gap_half = 1.1;
        let mut obstacles = Vec::new();
        let r = 0.45;
        let mut y = 0.5;
        while y <= 9.5 {
            if (y - gap_center).abs() > gap_half {
                obstacles.push(Disk { cx: 5.0, cy: y, r });
            }
            y += 0.5;
        }
        World {
            bounds: (0.0, 0.0, 10.0, 10.0),
            obstacles,
            start: Pose::new(1.5, 5.0, 0.0),
            goal: Pose::new(8.5, 5.0, 0.0),
            seed,
        }
    }

    /// A sealed ring of disks around the start; the goal outside is
    /// unreachable.
    pub fn sealed_box() -> World {
        let center = (5.0, 5.0);
        let ring_r = 3.0;
        let n = 24;
        let obstacles = (0..n)
            .map(|i| {
                let theta = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                Disk {
                    cx: center.0 + ring_r * theta.cos(),
                    cy: center.1 + ring_r * theta.sin(),
                    r: 0.5,
                }
            })
            .collect();
        World {
            bounds: (0.0, 0.0, 10.0, 10.0),
            obstacles,
            start: Pose::new(5.0, 5.0, 0.0),
            goal: Pose::new(9.5, 9.5, 0.0),
            seed: 0,
        }
    }
}
