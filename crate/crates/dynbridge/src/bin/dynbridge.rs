//! Batch CLI: load a TOML config, optionally override seed/experiment/output,
//! run the selected experiments and exit 0 (all checks passed), 1 (a check
//! failed) or 2 (configuration or runtime error).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use dynbridge::config::{Experiment, RunConfig};
use dynbridge::experiments;

#[derive(Parser, Debug)]
#[command(
    name = "dynbridge",
    about = "Simulation and verification harness for the dynamic Bessel bridge construction"
)]
struct Cli {
    /// TOML configuration file (defaults to the built-in canonical config)
    #[arg(long)]
    config: Option<PathBuf>,

    /// Override the master seed
    #[arg(long)]
    seed: Option<u64>,

    /// Override the experiment selector
    #[arg(long, value_enum)]
    experiment: Option<Experiment>,

    /// Override the output directory
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    let mut config = match &cli.config {
        Some(path) => match RunConfig::from_file(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("config error: {e}");
                return ExitCode::from(2);
            }
        },
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.run.seed = seed;
    }
    if let Some(experiment) = cli.experiment {
        config.run.experiment = experiment;
    }
    if let Some(out) = &cli.out {
        config.run.out_dir = out.to_string_lossy().into_owned();
    }
    if let Err(e) = config.validate() {
        eprintln!("config error: {e}");
        return ExitCode::from(2);
    }

    let threads = std::env::var("DYNBRIDGE_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .unwrap_or(config.run.threads);
    if threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("thread pool: {e}");
            return ExitCode::from(2);
        }
    }

    match experiments::run(&config) {
        Ok(outcome) => {
            for report in &outcome.reports {
                println!("{}", report.summary_line());
            }
            println!(
                "run {} finished in {:.1}s -> {}",
                outcome.run_id,
                outcome.wall_seconds,
                outcome.out_dir.display()
            );
            if outcome.all_passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("run error: {e}");
            ExitCode::from(2)
        }
    }
}
