//! Flag and subcommand definitions.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "twoproj",
    version,
    about = "Two-projection geometry: pair analyses, certificates, scenarios, and sweeps"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    #[command(flatten)]
    pub opts: GlobalOpts,
}

/// Flags shared by all subcommands; flags that a command does not use are
/// accepted and ignored.
#[derive(Debug, Args)]
pub struct GlobalOpts {
    /// Projection-pair document (JSON) to load instead of generating a pair
    #[arg(long, global = true, value_name = "PATH")]
    pub input: Option<PathBuf>,

    /// Seed for generated pairs and randomized sweeps
    #[arg(long, global = true, default_value_t = 42, value_name = "N")]
    pub seed: u64,

    /// Ambient dimension for generated pairs
    #[arg(long, global = true, default_value_t = 6, value_name = "N")]
    pub dim: usize,

    /// Sample count for grid scenarios; odd, so the midpoint is a sample
    #[arg(long, global = true, default_value_t = 1001, value_name = "N")]
    pub grid: usize,

    /// Tolerance override: validation cutoffs and the pass/fail threshold
    #[arg(long, global = true, value_name = "X")]
    pub tol: Option<f64>,

    /// Output format
    #[arg(long, global = true, value_enum, default_value_t = Format::Human)]
    pub format: Format,

    /// Write the report document to a file instead of stdout
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Human,
    Structured,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Angle, corner dimensions, spectrum, and identity residuals for one pair
    Analyze,
    /// Block decomposition: dimensions, generic spectrum, reconstruction residuals
    Halmos,
    /// Canonical exchange unitary and its defining residuals
    Unitary,
    /// Word-family norms against their closed forms, plus lower-bound checks
    Words,
    /// Certificate for a named grid-model or transfer scenario
    Scenario {
        /// One of: semiharmonious-not-harmonious, range-2ipq-fails,
        /// no-common-unitary, pqp-nonconvergence, invariant-submodule,
        /// matched-transfer
        #[arg(long, value_name = "NAME")]
        scenario: String,
    },
    /// Randomized pair sweep with plot-data tables
    Sweep {
        /// Number of generated pairs
        #[arg(long, default_value_t = 200, value_name = "N")]
        count: usize,
    },
}
