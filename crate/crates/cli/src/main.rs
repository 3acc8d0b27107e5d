//! `retlab`: batch runner for return-time experiments.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::Context;
use crate::config::{ExperimentConfig, RawConfig};
use crate::error::CliError;

#[derive(Parser)]
#[command(name = "retlab", version, about = "Return-time sequences, ergodic averages and verification checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Return times r_n up to n_max, with a growth-exponent summary
    Returns(Common),
    /// Averages of f(T^{r_n} x) on a lacunary checkpoint grid
    Average(Common),
    /// Exact and Monte Carlo verification suite
    Verify(Common),
    /// Ratio of observed to expected hit counts
    BcRatio(Common),
    /// Frequencies of r_n mod m
    Residues(Common),
    /// Rotation source with centred balls observed on the same rotation
    Counterexample(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long)]
    seed_override: Option<u64>,
    /// worker threads; parallelism is across seeds only
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

type Runner = fn(&Context) -> Result<(), CliError>;

fn run(cli: Cli) -> Result<(), CliError> {
    let (common, runner): (&Common, Runner) = match &cli.command {
        Command::Returns(c) => (c, commands::run_returns),
        Command::Average(c) => (c, commands::run_average),
        Command::Verify(c) => (c, commands::run_verify),
        Command::BcRatio(c) => (c, commands::run_bc_ratio),
        Command::Residues(c) => (c, commands::run_residues),
        Command::Counterexample(c) => (c, commands::run_counterexample),
    };
    let raw = RawConfig::load(&common.config)?;
    let cfg = ExperimentConfig::from_raw(raw, common.seed_override)?;
    std::fs::create_dir_all(&common.out)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(common.threads.max(1))
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    runner(&Context {
        cfg,
        out: common.out.clone(),
        pool,
    })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("retlab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
