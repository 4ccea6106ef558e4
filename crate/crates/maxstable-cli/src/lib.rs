//! Experiment harness for the max-stable field toolkit: configuration,
//! deterministic parallel replication, and CSV/JSON reporting.
//!
//! Every command is a library function taking an [`ExperimentConfig`] and an
//! output directory, so experiments can be driven in-process (tests) or from
//! the `maxstable` binary. Outputs are deterministic: a given
//! (config, seed) pair produces byte-identical data files regardless of the
//! worker count.

pub mod commands;
pub mod config;
pub mod output;

use std::fmt;

pub use commands::{
    cmd_bounds, cmd_clt_verify, cmd_coupling, cmd_estimate, cmd_simulate, cmd_variance_opt,
    verdict_from_normalized, CltVerdict, CommandOutcome,
};
pub use config::{ExperimentConfig, KernelKind, ModelKind, OutputFormat};

use maxstable::MaxStableError;

/// Process-level error classification behind the exit codes:
/// `2` config error, `3` numerical failure, `4` test-verdict failure.
#[derive(Debug)]
pub enum CliError {
    /// Invalid configuration or command-line input (exit code 2).
    Config(String),
    /// A numerical procedure failed at runtime (exit code 3).
    Numerical(String),
    /// A statistical test verb produced a FAIL verdict (exit code 4).
    TestFailed(String),
}

impl CliError {
    /// The process exit code for this error.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::TestFailed(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::TestFailed(m) => write!(f, "test failed: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<MaxStableError> for CliError {
    fn from(err: MaxStableError) -> Self {
        match err {
            // Problems a user fixes by editing the configuration.
            MaxStableError::InvalidParameter { .. }
            | MaxStableError::DimensionMismatch { .. }
            | MaxStableError::EmptySiteSet { .. }
            | MaxStableError::SetsNotDisjoint { .. }
            | MaxStableError::WrongModel { .. }
            | MaxStableError::BoundaryRatioExceeded { .. }
            | MaxStableError::MissingShiftedSites { .. } => CliError::Config(err.to_string()),
            // Runtime numerical conditions.
            MaxStableError::NotPositiveSemiDefinite { .. }
            | MaxStableError::DegenerateStatistic { .. }
            | MaxStableError::NonConvergent { .. }
            | MaxStableError::InconsistentSample { .. } => CliError::Numerical(err.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Numerical(format!("i/o failure: {err}"))
    }
}
