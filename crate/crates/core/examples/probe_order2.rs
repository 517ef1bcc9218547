// Detailed order-ablation probe: d_acc trajectory and final mIoU.
use cali_core::models::{ArchitectureConfig, OptimizerConfig};
use cali_core::synthdata::{generate_domain_pair, generate_target_eval, mild_shift_spec};
use cali_core::trainer::{run, Method, TrainConfig};

fn main() {
    let lr_disc: f64 = std::env::args().nth(1).unwrap().parse().unwrap();
    let iters: u64 = std::env::args().nth(2).unwrap().parse().unwrap();
    let spec = mild_shift_spec();
    let (src, tgt) = generate_domain_pair(&spec, 40, 40, 0).unwrap();
    let eval = generate_target_eval(&spec, 12, 0).unwrap();
    for wrong in [false, true] {
        let cfg = TrainConfig { method: Method::Cali, seed: 0, max_iters: iters, lr_disc,
            ablation_wrong_order: wrong, checkpoint_every: 0, ..TrainConfig::default() };
        let out = run(&cfg, &ArchitectureConfig::default(), &OptimizerConfig::default(), &src, &tgt, &eval.samples, None).unwrap();
        let label = if wrong { "wrong" } else { "right" };
        let dacc_traj: Vec<String> = out.metrics.iter().filter(|r| r.iter % 500 == 0)
            .map(|r| format!("{}:{}", r.iter, r.d_acc.map(|d| format!("{d:.2}")).unwrap_or("-".into()))).collect();
        println!("lr_d {lr_disc} {label} final {:.4} dacc[{}]", out.final_miou, dacc_traj.join(" "));
    }
}
