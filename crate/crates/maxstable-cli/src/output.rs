//! Run manifest and file-writing helpers.
//!
//! Every command writes a `manifest.json` that ties each produced number
//! back to the module, operation, and derived random stream that made it,
//! plus the canonical configuration text. Data files carry no timestamps
//! or environment details, so a given (config, seed) pair reproduces them
//! byte for byte.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

/// One derived random stream used during a run.
#[derive(Debug, Clone, Serialize)]
pub struct StreamRecord {
    /// Library module that consumed the stream.
    pub module: &'static str,
    /// Operation within the module.
    pub operation: &'static str,
    /// Replicate index, when the stream is per-replicate.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replicate: Option<u64>,
    /// The 64-bit stream identifier derived from the root seed.
    pub stream_id: u64,
}

/// Traceability record for one command invocation.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    /// Command verb.
    pub command: &'static str,
    /// Root seed all streams derive from.
    pub root_seed: u64,
    /// Worker threads used (does not affect any output byte).
    pub workers: usize,
    /// Replicates requested.
    pub replicates_requested: usize,
    /// Fraction of replicates whose truncation diagnostics flagged.
    pub truncation_flag_rate: f64,
    /// Every derived random stream, in consumption order.
    pub streams: Vec<StreamRecord>,
    /// Data files written, relative to the output directory.
    pub outputs: Vec<String>,
    /// Canonical text of the configuration in force.
    pub config_canonical: String,
}

impl Manifest {
    pub fn new(command: &'static str, root_seed: u64, workers: usize) -> Self {
        Manifest {
            command,
            root_seed,
            workers,
            replicates_requested: 0,
            truncation_flag_rate: 0.0,
            streams: Vec::new(),
            outputs: Vec::new(),
            config_canonical: String::new(),
        }
    }

    pub fn record_stream(
        &mut self,
        module: &'static str,
        operation: &'static str,
        replicate: Option<u64>,
        stream_id: u64,
    ) {
        self.streams.push(StreamRecord {
            module,
            operation,
            replicate,
            stream_id,
        });
    }

    /// Writes the manifest itself and returns its path.
    pub fn write(&self, dir: &Path) -> Result<PathBuf, CliError> {
        write_json(dir, "manifest.json", self)
    }
}

/// Creates `dir` (and parents) if needed.
pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::Numerical(format!("cannot create {}: {e}", dir.display())))
}

/// Writes pretty-printed JSON (with a trailing newline) under `dir`.
pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf, CliError> {
    let body = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Numerical(format!("cannot serialize {name}: {e}")))?;
    write_text(dir, name, &(body + "\n"))
}

/// Writes a text file under `dir` and returns its path.
pub fn write_text(dir: &Path, name: &str, body: &str) -> Result<PathBuf, CliError> {
    ensure_dir(dir)?;
    let path = dir.join(name);
    fs::write(&path, body)
        .map_err(|e| CliError::Numerical(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}
