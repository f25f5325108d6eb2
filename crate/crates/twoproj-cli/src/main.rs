//! Entry point: parse flags, dispatch, map failures to exit codes.
//!
//! Exit classes, never conflated: 0 when every check passes, 2 for bad flags
//! or bad input documents, 3 when inputs were valid but a mathematical check
//! failed.

mod args;
mod output;
mod run;

use std::process::ExitCode;

use clap::Parser;

use args::Cli;
use run::CliError;

fn main() -> ExitCode {
    let cli = Cli::try_parse().unwrap_or_else(|err| err.exit());
    match run::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Invariant(msg)) => {
            eprintln!("invariant violation: {msg}");
            ExitCode::from(3)
        }
    }
}
