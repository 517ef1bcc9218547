use cali_nav::navsim::{run_episode, Outcome, SimConfig, World};
use cali_nav::planner::PlannerConfig;
fn main() {
    let args: Vec<String> = std::env::args().collect();
    let omega: f64 = args[1].parse().unwrap();
    let n: usize = args[2].parse().unwrap();
    let a: f64 = args[3].parse().unwrap();
    let w2: f64 = args[4].parse().unwrap();
    let pcfg = PlannerConfig { omega_max: omega, n_primitives: n, a, w2, ..PlannerConfig::default() };
    let mut results = vec![];
    for seed in 0..10u64 {
        let log = run_episode(&World::wall_gap(seed), &pcfg, &SimConfig::default(), None).unwrap();
        results.push(format!("{:?}", log.outcome).chars().next().unwrap());
    }
    let bench: Vec<char> = (0..10).map(|s| {
        let log = run_episode(&World::benchmark(s), &pcfg, &SimConfig::default(), None).unwrap();
        format!("{:?}", log.outcome).chars().next().unwrap()
    }).collect();
    let empty = run_episode(&World::empty(), &pcfg, &SimConfig::default(), None).unwrap();
    println!("omega {omega} n {n} a {a} w2 {w2}: wall {:?} bench {:?} empty {:?} len {:.2}",
        results, bench, empty.outcome, empty.path_length);
}
