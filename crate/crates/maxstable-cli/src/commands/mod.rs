//! Command implementations.
//!
//! Each command is a pure function of (configuration, output directory):
//! it derives every random stream from the root seed, writes its data
//! files and a manifest, and returns a [`CommandOutcome`]. Parallelism
//! only distributes per-replicate work whose streams are fixed up front,
//! so outputs are byte-identical for any worker count.

mod bounds;
mod clt;
mod coupling;
mod estimate;
mod simulate;
mod variance;

pub use bounds::cmd_bounds;
pub use clt::{cmd_clt_verify, verdict_from_normalized, CltVerdict};
pub use coupling::cmd_coupling;
pub use estimate::cmd_estimate;
pub use simulate::cmd_simulate;
pub use variance::cmd_variance_opt;

use std::path::PathBuf;

use crate::CliError;

/// What a command produced.
#[derive(Debug)]
pub struct CommandOutcome {
    /// Files written, manifest last.
    pub files: Vec<PathBuf>,
    /// One-paragraph human summary for stdout.
    pub summary: String,
    /// Set when the command ran to completion but its statistical
    /// verdict failed; the caller maps this to the dedicated exit code
    /// after all files are on disk.
    pub test_failure: Option<String>,
}

/// Runs `job(0..replicates)` across `workers` threads, preserving
/// replicate order in the result. Results are collected by index, so the
/// output is independent of scheduling.
pub(crate) fn run_replicates<T, F>(
    workers: usize,
    replicates: usize,
    job: F,
) -> Result<Vec<T>, CliError>
where
    T: Send,
    F: Fn(usize) -> Result<T, CliError> + Sync,
{
    use rayon::prelude::*;
    if workers <= 1 {
        return (0..replicates).map(job).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Numerical(format!("cannot build thread pool: {e}")))?;
    pool.install(|| (0..replicates).into_par_iter().map(|i| job(i)).collect())
}
