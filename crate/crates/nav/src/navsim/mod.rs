//! Closed-loop 2D navigation: synthetic worlds, first-person navigability
//! rendering, and the plan–act loop.

mod episode;
mod render;
mod world;

pub use episode::{
    run_episode, step_world, summarize, EpisodeLog, Outcome, SimConfig, StepRecord, SuiteSummary,
};
pub use render::render_segmentation;
pub use world::{Disk, World};
