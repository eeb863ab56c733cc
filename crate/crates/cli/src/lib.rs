//! Command-line front end: phantom simulation, estimation, method comparison
//! and seed sweeps, with a small binary RF format and JSON/CSV outputs.

pub mod args;
pub mod commands;
pub mod documents;
pub mod error;
pub mod rf_file;

use std::io::Write;

pub use args::{Cli, Command};
pub use error::CliError;

pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Simulate(a) => commands::cmd_simulate(a, out),
        Command::Estimate(a) => commands::cmd_estimate(a, out),
        Command::Compare(a) => commands::cmd_compare(a, out),
        Command::Sweep(a) => commands::cmd_sweep(a, out),
    }
}

/// Sizes the global thread pool from `ACE_THREADS`, if set.
pub fn configure_threads(value: Option<&str>) -> Result<(), CliError> {
    let Some(value) = value else { return Ok(()) };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|n| *n >= 1)
        .ok_or_else(|| CliError::Usage(format!("ACE_THREADS must be a positive integer, got '{value}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot size thread pool: {e}")))
}
