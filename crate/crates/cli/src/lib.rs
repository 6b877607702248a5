//! The `gpig` command-line runner: subcommands that reproduce every
//! experiment of the toolkit from a seed, writing plot-ready CSV and JSON.

pub mod commands;
pub mod config;
pub mod pipelines;

use std::process::ExitCode;

pub use commands::Outcome;
pub use config::{Cli, RunConfig};

/// Exit status for success, a failed check and an input error.
pub const EXIT_OK: u8 = 0;
pub const EXIT_CHECK_FAILED: u8 = 1;
pub const EXIT_INPUT_ERROR: u8 = 2;

/// Resolves the configuration and runs the subcommand, inside a pool of
/// `--threads` workers when given.
pub fn run(cli: &Cli) -> anyhow::Result<Outcome> {
    let cfg = RunConfig::resolve(&cli.command)?;
    match cfg.threads {
        Some(threads) => {
            anyhow::ensure!(threads > 0, "--threads must be at least 1");
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
            pool.install(|| commands::execute(&cfg))
        }
        None => commands::execute(&cfg),
    }
}

pub fn exit_code(result: &anyhow::Result<Outcome>) -> ExitCode {
    ExitCode::from(match result {
        Ok(Outcome::Pass) => EXIT_OK,
        Ok(Outcome::CheckFailed) => EXIT_CHECK_FAILED,
        Err(_) => EXIT_INPUT_ERROR,
    })
}
