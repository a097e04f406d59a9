//! Command-line front end for native-space critic experiments: config
//! parsing, experiment orchestration, and CSV/plot-script emission.

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use thiserror::Error;

pub mod commands;
pub mod config;
pub mod output;

pub use config::{parse_config, RunConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("runtime error: {0}")]
    Runtime(String),
    #[error("io error: {0}")]
    Io(String),
}

impl CliError {
    /// Exit codes: 0 success, 1 config error, 2 runtime/divergence, 3 IO.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "native-critic",
    about = "Online critic value-function approximation in native spaces",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Path to the run configuration file.
    #[arg(long, global = true, default_value = "run.toml")]
    pub config: PathBuf,
    /// Override the configured output directory.
    #[arg(long, global = true)]
    pub out_dir: Option<String>,
    /// Override the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Suppress progress output.
    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand, Clone, Copy)]
pub enum Command {
    /// Integrate the online critic and write the trajectory log.
    Simulate,
    /// Center-refinement convergence sweep with log-log slope fits.
    Rates,
    /// Power-function field over the evaluation grid.
    Power,
    /// Windowed persistency-of-excitation diagnostics.
    Pe,
}

/// Parse the config, apply overrides, dispatch the subcommand.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    let mut config = parse_config(&cli.config)?;
    if let Some(dir) = &cli.out_dir {
        config.out_dir = dir.clone();
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    match cli.command {
        Command::Simulate => commands::cmd_simulate(&config, cli.quiet),
        Command::Rates => commands::cmd_rates(&config, cli.quiet),
        Command::Power => commands::cmd_power(&config, cli.quiet),
        Command::Pe => commands::cmd_pe(&config, cli.quiet),
    }
}

/// Entry point shared by the binary and the test suites.
pub fn run_to_exit_code(cli: &Cli) -> i32 {
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}
