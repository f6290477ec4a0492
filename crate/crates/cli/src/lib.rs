//! Command-line driver: reads a TOML run config, runs one command against
//! `roughlab-core` and writes a JSON report (plus a CSV grid dump for
//! `limset` and `clusters`).
//!
//! Exit codes: 0 all accepted or supported, 1 a rejection or violation,
//! 2 an inconclusive result, 3 an input error.

pub mod commands;
pub mod config;
pub mod error;
pub mod report;

use std::path::PathBuf;

use clap::Parser;

pub use commands::{Command, CommandOutput, Status};
pub use config::{Overrides, RunConfig};
pub use error::CliError;

pub const EXIT_INPUT_ERROR: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "roughlab",
    version,
    about = "Rough convergence experiments in S-metric spaces"
)]
pub struct Cli {
    /// axioms, member, minrough, limset, cauchy, clusters, verify, search
    pub command: String,
    /// Theorem id for `verify` (or `all`) and `search`
    pub target: Option<String>,
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides `seed` in the config
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Overrides `params.step`
    #[arg(long)]
    pub step: Option<f64>,
    /// Overrides both `params.stab_tol` and `params.dec_tol`
    #[arg(long)]
    pub tol: Option<f64>,
}

/// Runs one invocation and returns the process exit code.
pub fn run(cli: &Cli) -> u8 {
    match try_run(cli) {
        Ok((status, files)) => {
            for f in files {
                eprintln!("wrote {}", f.display());
            }
            eprintln!("status: {status:?}");
            status.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INPUT_ERROR
        }
    }
}

fn try_run(cli: &Cli) -> Result<(Status, Vec<PathBuf>), CliError> {
    let cmd = Command::parse(&cli.command, cli.target.as_deref())?;
    let ov = Overrides {
        seed: cli.seed,
        step: cli.step,
        tol: cli.tol,
    };
    let cfg = RunConfig::load(&cli.config)?.resolve(ov)?;
    let out = commands::execute(&cmd, &cfg)?;
    let report = report::build(&cfg, &cmd, &out)?;
    let files = report::write_all(&cli.out, &report, out.table.as_ref())?;
    Ok((out.status, files))
}
