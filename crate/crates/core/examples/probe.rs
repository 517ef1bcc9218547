// Quick experiment probe: runs one method on one preset and prints the
// final-metric trajectory. Not part of the shipped surface.
use cali_core::models::{ArchitectureConfig, OptimizerConfig};
use cali_core::synthdata::{generate_domain_pair, generate_target_eval, mild_shift_spec, hard_shift_spec};
use cali_core::trainer::{run, Method, TrainConfig};
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let method = Method::parse(&args[1]).unwrap();
    let seed: u64 = args[2].parse().unwrap();
    let iters: u64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(5000);
    let preset = args.get(4).map(|s| s.as_str()).unwrap_or("mild");
    let wrong: bool = args.get(5).map(|s| s == "wrong").unwrap_or(false);

    let spec = if preset == "hard" { hard_shift_spec() } else { mild_shift_spec() };
    let (src, tgt) = generate_domain_pair(&spec, 40, 40, seed).unwrap();
    let eval = generate_target_eval(&spec, 12, seed).unwrap();
    let cfg = TrainConfig { method, seed, max_iters: iters, ablation_wrong_order: wrong, checkpoint_every: 0, ..TrainConfig::default() };
    let t0 = Instant::now();
    let out = run(&cfg, &ArchitectureConfig::default(), &OptimizerConfig::default(), &src, &tgt, &eval.samples, None).unwrap();
    let dt = t0.elapsed().as_secs_f64();
    for row in out.metrics.iter().step_by(5) {
        println!("iter {:5} phase {:6} seg {:.4} v1 {:?} v2 {:?} wr {:?} disc {:.4} dacc {:?} miou {:.4}",
            row.iter, row.phase, row.seg_loss, row.v1.map(|v| (v*1000.0).round()/1000.0),
            row.v2.map(|v| (v*1000.0).round()/1000.0), row.wr.map(|v| (v*100.0).round()/100.0),
            row.target_discrepancy, row.d_acc, row.miou);
    }
    println!("method {} seed {} final_miou {:.4}  ({:.1}s)", method.name(), seed, out.final_miou, dt);
}
