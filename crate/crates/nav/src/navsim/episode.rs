//! The plan–act loop.

use super::render::render_segmentation;
use super::world::World;
use crate::planner::{
    edf, extract_boundary, generate_primitives, project_primitives, sedf, select_primitive,
    write_mask_pgm, write_pgm16, CostBreakdown, PlannerConfig, Pose,
};
use cali_core::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Simulator parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    /// Seconds of the selected primitive executed per replan.
    pub replan_dt: f64,
    /// Episode ends in `Reached` within this distance of the goal (m).
    pub goal_epsilon: f64,
    pub max_steps: usize,
    /// Robot radius used to inflate obstacles for collision checking (m).
    pub robot_radius: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            replan_dt: 0.5,
            goal_epsilon: 0.3,
            max_steps: 400,
            robot_radius: 0.2,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replan_dt <= 0.0 || self.goal_epsilon <= 0.0 || self.max_steps == 0 {
            return Err(Error::config("sim parameters must be positive"));
        }
        Ok(())
    }
}

/// How an episode ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Reached,
    Collided,
    Timeout,
}

/// One planning step's record.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StepRecord {
    pub selected: usize,
    pub costs: Vec<CostBreakdown>,
}

/// Full episode trace.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub outcome: Outcome,
    pub path_length: f64,
    pub poses: Vec<Pose>,
    pub steps: Vec<StepRecord>,
}

/// Advances the pose along a primitive's controls for `dt` by exact
/// unicycle integration; flags a collision when the swept path enters an
/// inflated obstacle or leaves the bounds. The sweep is sampled at 1 cm.
pub fn step_world(
    world: &World,
    pose: &Pose,
    v: f64,
    omega: f64,
    dt: f64,
    robot_radius: f64,
) -> (Pose, bool) {
    let arc = crate::planner::unicycle_pose(v, omega, dt);
    let end = pose.from_local(&arc);
    // sample the swept path
    let length = v * dt;
    let n = ((length / 0.01).ceil() as usize).max(2);
    for i in 1..=n {
        let t = dt * i as f64 / n as f64;
        let p = pose.from_local(&crate::planner::unicycle_pose(v, omega, t));
        if !world.navigable(p.x, p.y, robot_radius) {
            return (p, true);
        }
    }
    (end, false)
}

/// Runs one closed-loop episode: render → boundary → field → project →
/// select → execute, until the goal, a collision, or the step limit.
///
/// With `dump`, every step writes its mask and scaled field as PGM files
/// into the directory.
pub fn run_episode(
    world: &World,
    planner: &PlannerConfig,
    sim: &SimConfig,
    dump: Option<&Path>,
) -> Result<EpisodeLog> {
    world.validate()?;
    planner.validate()?;
    sim.validate()?;
    if let Some(dir) = dump {
        std::fs::create_dir_all(dir)?;
    }

    let mut lib = generate_primitives(
        planner.n_primitives,
        planner.linear_velocity,
        planner.omega_max,
        planner.horizon,
        planner.samples_per_primitive,
    );
    project_primitives(&mut lib, &planner.camera);

    let mut pose = world.start;
    let mut poses = vec![pose];
    let mut steps = Vec::new();
    let mut path_length = 0.0;
    let mut outcome = Outcome::Timeout;

    for step in 0..sim.max_steps {
        if pose.distance_xy(&world.goal) <= sim.goal_epsilon {
            outcome = Outcome::Reached;
            break;
        }
        let mask = render_segmentation(world, &pose, &planner.camera);
        let boundary = extract_boundary(&mask, planner.v_thres());
        let field = sedf(
            &edf(&boundary, planner.camera.image_width, planner.camera.image_height),
            planner.alpha,
        )?;
        let goal_local = pose.to_local(&world.goal);
        let (selected, costs) = select_primitive(
            &lib,
            &field,
            &goal_local,
            planner.w1,
            planner.w2,
            planner.a,
            planner.b,
            planner.literal_eq25,
        )?;
        if let Some(dir) = dump {
            write_mask_pgm(&mask, &dir.join(format!("mask_{step:04}.pgm")))?;
            write_pgm16(&field, &dir.join(format!("sedf_{step:04}.pgm")))?;
        }
        steps.push(StepRecord { selected, costs });

        let before = pose;
        let (next, collided) = step_world(
            world,
            &pose,
            lib[selected].v,
            lib[selected].omega,
            sim.replan_dt,
            sim.robot_radius,
        );
        path_length += before.distance_xy(&next);
        pose = next;
        poses.push(pose);
        if collided {
            outcome = Outcome::Collided;
            break;
        }
    }
    if outcome == Outcome::Timeout && pose.distance_xy(&world.goal) <= sim.goal_epsilon {
        outcome = Outcome::Reached;
    }

    Ok(EpisodeLog {
        outcome,
        path_length,
        poses,
        steps,
    })
}

/// Drives a batch of worlds and summarizes outcomes; used by the CLI's
/// suite runner.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub episodes: usize,
    pub reached: usize,
    pub collided: usize,
    pub timeout: usize,
    pub mean_path_length: f64,
}

pub fn summarize(logs: &[EpisodeLog]) -> SuiteSummary {
    let reached = logs.iter().filter(|l| l.outcome == Outcome::Reached).count();
    let collided = logs.iter().filter(|l| l.outcome == Outcome::Collided).count();
    let timeout = logs.iter().filter(|l| l.outcome == Outcome::Timeout).count();
    let mean_path_length = if logs.is_empty() {
        0.0
    } else {
        logs.iter().map(|l| l.path_length).sum::<f64>() / logs.len() as f64
    };
    SuiteSummary {
        episodes: logs.len(),
        reached,
        collided,
        timeout,
        mean_path_length,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_velocity_keeps_pose() {
        let world = World::empty();
        let (next, collided) = step_world(&world, &world.start, 0.0, 0.3, 0.5, 0.2);
        assert!(!collided);
        assert_eq!(next.x, world.start.x);
        assert_eq!(next.y, world.start.y);
    }

    #[test]
    fn straight_step_reaches_primitive_endpoint() {
        let world = World::empty();
        let pose = Pose::new(2.0, 2.0, 0.5);
        let (next, collided) = step_world(&world, &pose, 0.3, 0.0, 3.0, 0.2);
        assert!(!collided);
        let expect = pose.from_local(&crate::planner::unicycle_pose(0.3, 0.0, 3.0));
        assert!((next.x - expect.x).abs() < 1e-12);
        assert!((next.y - expect.y).abs() < 1e-12);
    }

    #[test]
    fn crossing_a_disk_collides() {
        // oracle: segment–circle intersection. A straight drive from
        // (1,5) along +x for 2 m crosses a disk centered (2.2, 5) r=0.3
        // inflated by 0.2 exactly when |y−5| < 0.5, which holds here.
        let mut world = World::empty();
        world.obstacles.push(super::super::world::Disk {
            cx: 2.2,
            cy: 5.0,
            r: 0.3,
        });
        let (at, collided) = step_world(&world, &world.start, 0.4, 0.0, 5.0, 0.2);
        assert!(collided);
        // collision is flagged near the circle entry point x = 2.2 − 0.5
        assert!((at.x - 1.7).abs() < 0.05, "entered at x = {}", at.x);
    }
}
