// Seed sweep for one method/preset at a configurable discriminator lr.
use cali_core::models::{ArchitectureConfig, OptimizerConfig};
use cali_core::synthdata::{generate_domain_pair, generate_target_eval, hard_shift_spec, mild_shift_spec};
use cali_core::trainer::{run, Method, TrainConfig};

fn main() {
    let a: Vec<String> = std::env::args().collect();
    let method = Method::parse(&a[1]).unwrap();
    let preset = a[2].as_str();
    let lr_disc: f64 = a[3].parse().unwrap();
    let spec = if preset == "hard" { hard_shift_spec() } else { mild_shift_spec() };
    for seed in 0..3u64 {
        let (src, tgt) = generate_domain_pair(&spec, 40, 40, seed).unwrap();
        let eval = generate_target_eval(&spec, 12, seed).unwrap();
        let cfg = TrainConfig { method, seed, max_iters: 5000, lr_disc,
            checkpoint_every: 0, ..TrainConfig::default() };
        let out = run(&cfg, &ArchitectureConfig::default(), &OptimizerConfig::default(), &src, &tgt, &eval.samples, None).unwrap();
        println!("{} {} lrd {} seed {}: {:.4}", method.name(), preset, lr_disc, seed, out.final_miou);
    }
}
