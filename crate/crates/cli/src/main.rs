//! Batch front end: `check` validates a config, `run` executes its
//! experiments into CSV/SVG artifacts plus a manifest, `describe` prints the
//! assembled generator with a spectral summary.
//!
//! Exit codes: 0 success, 2 config error, 3 validation error, 4 numeric
//! failure.

mod artifacts;
mod config;
mod runner;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Validation(String),
    Numeric(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, out: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(msg) => write!(out, "config error: {msg}"),
            CliError::Validation(msg) => write!(out, "validation failed:\n{msg}"),
            CliError::Numeric(msg) => write!(out, "numeric failure: {msg}"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Validation(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "fklab",
    about = "Killed-chain laboratory: spectral limits, conditional moments, \
             path estimators, and deviation rates from one JSON config"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Overrides the config's output directory.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Overrides the config's master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Advisory parallelism hint; execution is sequential and its output is
    /// identical at any setting.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a config and validate its model, writing nothing.
    Check { config: PathBuf },
    /// Execute every experiment and emit artifacts plus a manifest.
    Run { config: PathBuf },
    /// Print the assembled generator and spectral summary.
    Describe { config: PathBuf },
}

fn load(path: &PathBuf) -> Result<config::ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    config::parse(&text)
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Check { config } => {
            let cfg = load(config)?;
            runner::Workbench::assemble(&cfg)?;
            println!("ok: config parses and the model passes validation");
            Ok(())
        }
        Command::Run { config } => {
            let mut cfg = load(config)?;
            if let Some(seed) = cli.seed {
                cfg.seed = seed;
            }
            let out_dir = cli.output_dir.clone().unwrap_or_else(|| cfg.output_dir.clone());
            runner::run(&cfg, &out_dir, cfg.seed)
        }
        Command::Describe { config } => {
            let cfg = load(config)?;
            runner::describe(&cfg)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{err}");
            ExitCode::from(err.exit_code())
        }
    }
}
