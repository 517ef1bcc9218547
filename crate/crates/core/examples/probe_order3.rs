// Order ablation with configurable lr_da / lr_disc / interval.
use cali_core::models::{ArchitectureConfig, OptimizerConfig};
use cali_core::synthdata::{generate_domain_pair, generate_target_eval, mild_shift_spec};
use cali_core::trainer::{run, Method, TrainConfig};

fn main() {
    let a: Vec<String> = std::env::args().collect();
    let (lr_da, lr_disc, interval): (f64, f64, u64) =
        (a[1].parse().unwrap(), a[2].parse().unwrap(), a[3].parse().unwrap());
    let iters: u64 = a.get(4).map(|s| s.parse().unwrap()).unwrap_or(5000);
    let spec = mild_shift_spec();
    let (src, tgt) = generate_domain_pair(&spec, 40, 40, 0).unwrap();
    let eval = generate_target_eval(&spec, 12, 0).unwrap();
    for wrong in [false, true] {
        let cfg = TrainConfig { method: Method::Cali, seed: 0, max_iters: iters, lr_da, lr_disc,
            interval, ablation_wrong_order: wrong, checkpoint_every: 0, ..TrainConfig::default() };
        let out = run(&cfg, &ArchitectureConfig::default(), &OptimizerConfig::default(), &src, &tgt, &eval.samples, None).unwrap();
        let label = if wrong { "wrong" } else { "right" };
        let max1k = out.metrics.iter().filter(|r| r.iter > 0 && r.iter <= 1000)
            .filter_map(|r| r.d_acc).fold(0.0f64, f64::max);
        let traj: Vec<String> = out.metrics.iter().filter(|r| r.iter % 1000 == 0)
            .map(|r| format!("{}:{}", r.iter, r.d_acc.map(|d| format!("{d:.2}")).unwrap_or("-".into()))).collect();
        println!("lrda {lr_da} lrd {lr_disc} I {interval} {label}: final {:.4} max_dacc@1k {max1k:.3} [{}]",
            out.final_miou, traj.join(" "));
    }
}
