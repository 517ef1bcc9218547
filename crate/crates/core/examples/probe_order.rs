// Order-ablation probe over discriminator learning rates.
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
        let max_dacc_1k = out.metrics.iter().filter(|r| r.iter <= 1000 && r.iter > 0)
            .filter_map(|r| r.d_acc).fold(0.0f64, f64::max);
        let label = if wrong { "wrong " } else { "right " };
        println!("lr_d {lr_disc} {label} max_dacc<=1k {max_dacc_1k:.3} final_miou {:.4}", out.final_miou);
    }
}
