use cali_nav::navsim::{run_episode, Outcome, SimConfig, World};
use cali_nav::planner::PlannerConfig;
fn main() {
    for seed in 0..10u64 {
        let world = World::wall_gap(seed);
        let log = run_episode(&world, &PlannerConfig::default(), &SimConfig::default(), None).unwrap();
        let gap_y = world.obstacles.windows(2).find(|w| w[1].cy - w[0].cy > 0.6).map(|w| (w[0].cy + w[1].cy)/2.0);
        println!("seed {seed}: {:?} path {:.2} steps {} gap_at {:?} final ({:.2},{:.2})",
            log.outcome, log.path_length, log.steps.len(), gap_y,
            log.poses.last().unwrap().x, log.poses.last().unwrap().y);
    }
}
