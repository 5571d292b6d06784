//! `ritz`: command-line driver for the ritz-core experiments, configured by
//! JSON documents.
//!
//! Exit codes: 0 success, 1 a check failed or the run aborted, 2 the
//! configuration or command line is invalid.

mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ritz_core::verify::VerifyConfig;
use thiserror::Error;

use commands::{ApproxConfig, Outcome, SweepCommandConfig, TrainCommandConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("run failed: {0}")]
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "ritz", version, about = "Deep Ritz / PINN experiments on shallow networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the ReLU interpolant H1 certificate; writes approx_check.csv.
    ApproxCheck(Common),
    /// Train one network by ERM; writes train_report.json and train_trace.csv.
    Train(Common),
    /// Sweep sample sizes; writes rate_report.json and rate_cells.csv.
    RateSweep(Common),
    /// Run the invariant suites; writes verify_report.json.
    Verify(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// JSON config file; defaults apply to missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set steps=100` or `--set optimizer.kind=plain_gd`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Master seed (overrides the config's `seed`).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory, created if missing.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

impl Common {
    fn resolve<T: serde::de::DeserializeOwned>(&self) -> Result<T, CliError> {
        config::resolve(self.config.as_deref(), &self.sets, self.seed)
    }

    fn prepare(&self) -> Result<&Path, CliError> {
        if let Some(jobs) = self.jobs {
            if jobs == 0 {
                return Err(CliError::Config("--jobs must be >= 1".into()));
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(jobs)
                .build_global()
                .map_err(|e| CliError::Runtime(format!("cannot start worker pool: {e}")))?;
        }
        std::fs::create_dir_all(&self.out)
            .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", self.out.display())))?;
        Ok(&self.out)
    }
}

fn dispatch(command: &Command) -> Result<Outcome, CliError> {
    match command {
        Command::ApproxCheck(c) => {
            let cfg: ApproxConfig = c.resolve()?;
            commands::approx_check(&cfg, c.prepare()?)
        }
        Command::Train(c) => {
            let cfg: TrainCommandConfig = c.resolve()?;
            commands::train(&cfg, c.prepare()?)
        }
        Command::RateSweep(c) => {
            let cfg: SweepCommandConfig = c.resolve()?;
            commands::sweep(&cfg, c.prepare()?)
        }
        Command::Verify(c) => {
            let cfg: VerifyConfig = c.resolve()?;
            commands::verify(&cfg, c.prepare()?)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match dispatch(&cli.command) {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            ExitCode::from(if outcome.pass { 0 } else { 1 })
        }
        Err(e) => {
            eprintln!("ritz: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
