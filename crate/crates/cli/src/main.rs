//! `monorec`: simulate, reconstruct, and verify inclusion detection
//! experiments from the command line.
//!
//! Exit codes: 0 success, 2 configuration or artifact mismatch, 3 numerical
//! failure, 1 anything else (typically io).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use monorec_cli::config::RunConfig;
use monorec_cli::pipeline;
use monorec_core::CoreError;

#[derive(Parser)]
#[command(
    name = "monorec",
    version,
    about = "Inclusion detection in linear elasticity from boundary measurements",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the forward problem and store the simulated measurement.
    Simulate {
        /// Experiment config (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Output directory for all artifacts.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Override the config's noise level.
        #[arg(long)]
        noise: Option<f64>,
        /// Override the config's noise seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Build the per-cube test operator bank on the offline mesh.
    Offline {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Worker threads for the per-cube solves (0 = automatic).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Classify every test cube against a stored measurement.
    Reconstruct {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Eigenvalue threshold, overriding config and noise-derived values.
        #[arg(long)]
        delta: Option<f64>,
        /// Measurement matrix to use instead of <out>/measurement.ntd.
        #[arg(long)]
        measurement: Option<PathBuf>,
        /// Operator bank to use instead of <out>/bank.ntd (grid.json is
        /// expected next to it).
        #[arg(long)]
        bank: Option<PathBuf>,
    },
    /// Tabulate phase timings from one or more runs.
    Report {
        /// timings.json files, one per run.
        #[arg(long, required = true, num_args = 1..)]
        timings: Vec<PathBuf>,
        /// Directory to write report.json into (omit to only print).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the numerical verification battery.
    Verify {
        /// Take materials and dimension from this config instead of the
        /// built-in test setup.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Seed for the battery's randomized checks.
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn exit_code_for(err: &CoreError) -> ExitCode {
    match err {
        CoreError::Config(_) | CoreError::InvalidArgument(_) | CoreError::ArtifactMismatch(_) => {
            ExitCode::from(2)
        }
        CoreError::Solver { .. } | CoreError::Numerical(_) => ExitCode::from(3),
        CoreError::Io(_) => ExitCode::from(1),
    }
}

fn run(cli: Cli) -> Result<(), CoreError> {
    match cli.command {
        Command::Simulate { config, out, noise, seed } => {
            let cfg = RunConfig::load(&config)?;
            pipeline::cmd_simulate(&cfg, &out, noise, seed)
        }
        Command::Offline { config, out, workers } => {
            let cfg = RunConfig::load(&config)?;
            pipeline::cmd_offline(&cfg, &out, workers)
        }
        Command::Reconstruct { config, out, delta, measurement, bank } => {
            let cfg = RunConfig::load(&config)?;
            pipeline::cmd_reconstruct(&cfg, &out, delta, measurement.as_deref(), bank.as_deref())
        }
        Command::Report { timings, out } => pipeline::cmd_report(&timings, out.as_deref()),
        Command::Verify { config, seed } => {
            let cfg = config.map(|p| RunConfig::load(&p)).transpose()?;
            pipeline::cmd_verify(cfg.as_ref(), seed)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            exit_code_for(&err)
        }
    }
}
