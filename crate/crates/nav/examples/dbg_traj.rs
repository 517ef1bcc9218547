use cali_nav::navsim::{run_episode, SimConfig, World};
use cali_nav::planner::PlannerConfig;
fn main() {
    let world = World::wall_gap(1);
    let log = run_episode(&world, &PlannerConfig::default(), &SimConfig::default(), None).unwrap();
    for (i, p) in log.poses.iter().enumerate().step_by(8) {
        let sel = log.steps.get(i).map(|s| s.selected as i64).unwrap_or(-1);
        println!("{i:3}: ({:.2}, {:.2}) psi {:.2} sel {sel}", p.x, p.y, p.psi);
    }
    println!("outcome {:?}", log.outcome);
}
