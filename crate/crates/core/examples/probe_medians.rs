// Discrepancy-trend check: medians over iteration windows for one method.
use cali_core::models::{ArchitectureConfig, OptimizerConfig};
use cali_core::synthdata::{generate_domain_pair, generate_target_eval, mild_shift_spec};
use cali_core::trainer::{run, Method, TrainConfig};

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) }
}

fn main() {
    let method = Method::parse(&std::env::args().nth(1).unwrap()).unwrap();
    let lr_disc: f64 = std::env::args().nth(2).map(|s| s.parse().unwrap()).unwrap_or(1e-4);
    let spec = mild_shift_spec();
    let mut early_all = vec![];
    let mut late_all = vec![];
    for seed in 0..3u64 {
        let (src, tgt) = generate_domain_pair(&spec, 40, 40, seed).unwrap();
        let eval = generate_target_eval(&spec, 12, seed).unwrap();
        let cfg = TrainConfig { method, seed, lr_disc, checkpoint_every: 0, ..TrainConfig::default() };
        let out = run(&cfg, &ArchitectureConfig::default(), &OptimizerConfig::default(), &src, &tgt, &eval.samples, None).unwrap();
        let early: Vec<f64> = out.metrics.iter().filter(|r| r.iter <= 500).map(|r| r.target_discrepancy).collect();
        let late: Vec<f64> = out.metrics.iter().filter(|r| r.iter >= 2000).map(|r| r.target_discrepancy).collect();
        println!("{} seed {seed}: early {:.5} late {:.5} miou {:.4}",
            method.name(), median(early.clone()), median(late.clone()), out.final_miou);
        early_all.extend(early);
        late_all.extend(late);
    }
    println!("{} pooled: early {:.5} late {:.5}", method.name(), median(early_all), median(late_all));
}
