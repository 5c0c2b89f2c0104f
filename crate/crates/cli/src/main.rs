use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use stoheat_cli::config::{self, ExperimentKind};
use stoheat_cli::report;
use stoheat_cli::runner;

/// Simulation and statistical verification for the stochastic heat
/// equation with one-sided Lipschitz drift and spatially homogeneous noise.
#[derive(Parser)]
#[command(name = "stoheat", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute an experiment described by a TOML config file.
    Run {
        config: PathBuf,
        /// Override the master seed from the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads for Monte Carlo replicas (default: all cores).
        #[arg(long)]
        workers: Option<usize>,
        /// Output directory (default: config, then $STOHEAT_OUT, then ./runs).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Summarize a finished run directory.
    Report { dir: PathBuf },
    /// Run the built-in verification suite with default parameters.
    Accept {
        #[arg(long, default_value_t = stoheat_cli::accept::DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Run { config: path, seed, workers, out } => {
            let mut resolved = config::load_config(&path)?;
            if let Some(s) = seed {
                resolved.config.seed = s;
                resolved = config::resolve(resolved.config)?;
            }
            let out_dir = runner::resolve_out_dir(
                out,
                resolved.config.out_dir.clone(),
                resolved.config.kind,
                resolved.config.seed,
            );
            let output = runner::run_experiment(&resolved, workers, &out_dir)?;
            println!("run complete: {}", output.dir.display());
            Ok(match output.all_pass {
                Some(false) => 1,
                _ => 0,
            })
        }
        Command::Report { dir } => {
            runner::assert_run_dir(&dir)?;
            report::emit_report(&dir)
        }
        Command::Accept { seed, workers, out } => {
            let cfg = config::ExperimentConfig {
                kind: ExperimentKind::FullAcceptance,
                seed,
                replicas: 200,
                out_dir: None,
                grid: Default::default(),
                drift: Default::default(),
                sigma: Default::default(),
                noise: Default::default(),
                weights: Default::default(),
                kolmogorov: Default::default(),
                tol: 1e-6,
                max_iter: 50,
                dump_fields: false,
            };
            let resolved = config::resolve(cfg)?;
            let out_dir = runner::resolve_out_dir(out, None, ExperimentKind::FullAcceptance, seed);
            let output = runner::run_experiment(&resolved, workers, &out_dir)?;
            println!("acceptance ledger: {}", output.dir.join("acceptance.csv").display());
            Ok(if output.all_pass == Some(true) { 0 } else { 1 })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
