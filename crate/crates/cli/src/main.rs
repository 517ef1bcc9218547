//! `cali` — a command-line workbench for coarse-to-fine domain-adaptive
//! segmentation and the visual planner built on it.

use cali_cli::config::RunConfig;
use cali_cli::ops;
use cali_core::trainer::Method;
use cali_core::Error;
use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "cali",
    about = "Domain-adaptive segmentation workbench: synthetic domains, alternating adversarial training, divergence oracles, and a visual planner in a 2D simulator",
    after_help = config_help()
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

fn config_help() -> String {
    format!(
        "All randomness derives from --seed via a splitmix expansion.\n\n{}",
        RunConfig::describe_defaults()
    )
}

#[derive(Subcommand)]
enum Command {
    /// Generate the source/target/target-eval datasets of a domain pair.
    GenData {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one method on a domain pair and log metrics and checkpoints.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        /// so | da | ca | cali | icali
        #[arg(long)]
        method: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Read datasets from a gen-data directory instead of regenerating.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a checkpoint on a dataset directory.
    Eval {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Output stem; writes <out>.json and <out>.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the divergence estimator, brute-force oracles, and bound check.
    Divergence {
        #[arg(long)]
        config: Option<PathBuf>,
        /// identical | separated | overlapping | pixels
        #[arg(long, default_value = "pixels")]
        preset: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Plan one frame in a world and dump the mask, fields and costs.
    Plan {
        #[arg(long)]
        config: Option<PathBuf>,
        /// empty | bench:N | gap:N | box
        #[arg(long, default_value = "bench:0")]
        world: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a closed-loop episode suite.
    Navigate {
        #[arg(long)]
        config: Option<PathBuf>,
        /// bench | gap | box | empty
        #[arg(long, default_value = "bench")]
        suite: String,
        #[arg(long)]
        out: PathBuf,
        /// Dump per-step masks and fields as PGM files.
        #[arg(long)]
        dump: bool,
    },
    /// Aggregate training runs into a per-method summary table.
    Report {
        /// Directory containing training run directories.
        #[arg(long)]
        runs: PathBuf,
        /// Output stem; writes <out>.csv and <out>.json.
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(path: &Option<PathBuf>) -> cali_core::Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

fn execute(cli: Cli) -> cali_core::Result<()> {
    match cli.command {
        Command::GenData { config, seed, out } => {
            let cfg = load_config(&config)?;
            ops::gen_data(&cfg, seed, &out)
        }
        Command::Train {
            config,
            method,
            seed,
            data,
            out,
        } => {
            let cfg = load_config(&config)?;
            let method = Method::parse(&method)?;
            ops::train(&cfg, method, seed, data.as_deref(), &out)?;
            Ok(())
        }
        Command::Eval {
            config,
            checkpoint,
            data,
            out,
        } => {
            let cfg = load_config(&config)?;
            ops::eval(&cfg, &checkpoint, &data, &out)?;
            Ok(())
        }
        Command::Divergence {
            config,
            preset,
            seed,
            out,
        } => {
            let cfg = load_config(&config)?;
            let report = ops::divergence(&preset, &cfg, seed, out.as_deref())?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(())
        }
        Command::Plan { config, world, out } => {
            let cfg = load_config(&config)?;
            let selected = ops::plan(&cfg, &world, &out)?;
            println!("selected primitive {selected}");
            Ok(())
        }
        Command::Navigate {
            config,
            suite,
            out,
            dump,
        } => {
            let cfg = load_config(&config)?;
            let logs = ops::navigate(&cfg, &suite, &out, dump)?;
            for (i, log) in logs.iter().enumerate() {
                println!(
                    "episode {i:02}: {:?}, path {:.2} m",
                    log.outcome, log.path_length
                );
            }
            Ok(())
        }
        Command::Report { runs, out } => {
            let csv = ops::report(&runs, &out)?;
            print!("{csv}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            let code = match err {
                Error::Config(_) | Error::Contract(_) | Error::Shape(_) => 2,
                Error::Numeric(_) => 3,
                Error::Format { .. } | Error::Io(_) | Error::Json(_) => 4,
            };
            ExitCode::from(code)
        }
    }
}
