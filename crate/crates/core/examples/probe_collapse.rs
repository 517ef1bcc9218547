// Collapse-analog probe: mild appearance shift plus an unremovable
// noise-variance gap; so vs right-order vs wrong-order cali.
use cali_core::models::{ArchitectureConfig, OptimizerConfig};
use cali_core::synthdata::{generate_domain_pair, generate_target_eval, mild_shift_spec, DomainSpec};
use cali_core::trainer::{run, Method, TrainConfig};

fn main() {
    let sigma_shift: f64 = std::env::args().nth(1).unwrap().parse().unwrap();
    let lr_disc: f64 = std::env::args().nth(2).map(|s| s.parse().unwrap()).unwrap_or(1e-4);
    let interval: u64 = std::env::args().nth(3).map(|s| s.parse().unwrap()).unwrap_or(50);
    let spec = DomainSpec { noise_sigma_shift: sigma_shift, ..mild_shift_spec() };
    let (src, tgt) = generate_domain_pair(&spec, 40, 40, 0).unwrap();
    let eval = generate_target_eval(&spec, 12, 0).unwrap();
    let runs: [(&str, Method, bool); 3] = [
        ("so   ", Method::So, false),
        ("right", Method::Cali, false),
        ("wrong", Method::Cali, true),
    ];
    for (label, method, wrong) in runs {
        let cfg = TrainConfig { method, seed: 0, max_iters: 5000, lr_disc, interval,
            ablation_wrong_order: wrong, checkpoint_every: 0, ..TrainConfig::default() };
        let out = run(&cfg, &ArchitectureConfig::default(), &OptimizerConfig::default(), &src, &tgt, &eval.samples, None).unwrap();
        let max1k = out.metrics.iter().filter(|r| r.iter > 0 && r.iter <= 1000)
            .filter_map(|r| r.d_acc_peak).fold(0.0f64, f64::max);
        let traj: Vec<String> = out.metrics.iter().filter(|r| r.iter % 1000 == 0)
            .map(|r| format!("{}:{}", r.iter, r.d_acc.map(|d| format!("{d:.2}")).unwrap_or("-".into()))).collect();
        println!("ds {sigma_shift} lrd {lr_disc} I {interval} {label}: final {:.4} peak_dacc@1k {max1k:.3} [{}]",
            out.final_miou, traj.join(" "));
    }
}
