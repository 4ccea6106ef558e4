//! `simulate`: draw field replicates and dump them to disk.

use std::path::Path;

use maxstable::rng::{stream_id, stream_rng, StreamDomain};
use maxstable::simulate::FieldSimulator;
use maxstable::TruncationPolicy64;

use crate::commands::{run_replicates, CommandOutcome};
use crate::config::{ExperimentConfig, OutputFormat};
use crate::output::{ensure_dir, write_text, Manifest};
use crate::CliError;

pub fn cmd_simulate(config: &ExperimentConfig, out: &Path) -> Result<CommandOutcome, CliError> {
    let spec = config.build_spec()?;
    let window = config.build_window()?;
    let policy = TruncationPolicy64::default();

    let mut pilot_rng = stream_rng(config.seed, StreamDomain::Pilot, 0);
    let simulator = FieldSimulator::new(&spec, &window, &policy, &mut pilot_rng)?;

    let samples = run_replicates(config.workers, config.replicates, |i| {
        let mut rng = stream_rng(config.seed, StreamDomain::Simulation, i as u64);
        Ok(simulator.draw(&mut rng)?)
    })?;

    let samples_dir = out.join("samples");
    ensure_dir(&samples_dir)?;
    let mut manifest = Manifest::new("simulate", config.seed, config.workers);
    manifest.replicates_requested = config.replicates;
    manifest.config_canonical = config.to_canonical_text();
    manifest.record_stream(
        "simulate",
        "pilot-calibration",
        None,
        stream_id(StreamDomain::Pilot, 0),
    );

    let mut files = Vec::new();
    let mut flagged = 0usize;
    for (i, sample) in samples.iter().enumerate() {
        if sample.truncation_flagged() {
            flagged += 1;
        }
        let name = match config.format {
            OutputFormat::Csv => format!("replicate_{i:05}.csv"),
            OutputFormat::Json => format!("replicate_{i:05}.json"),
        };
        let body = match config.format {
            OutputFormat::Csv => {
                let mut buf = Vec::new();
                sample
                    .write_csv(&mut buf)
                    .map_err(|e| CliError::Numerical(format!("csv encoding failed: {e}")))?;
                String::from_utf8(buf)
                    .map_err(|e| CliError::Numerical(format!("csv encoding failed: {e}")))?
            }
            OutputFormat::Json => {
                serde_json::to_string_pretty(sample)
                    .map_err(|e| CliError::Numerical(format!("json encoding failed: {e}")))?
                    + "\n"
            }
        };
        files.push(write_text(&samples_dir, &name, &body)?);
        manifest.record_stream(
            "simulate",
            "field-replicate",
            Some(i as u64),
            stream_id(StreamDomain::Simulation, i as u64),
        );
        manifest.outputs.push(format!("samples/{name}"));
    }
    manifest.truncation_flag_rate = flagged as f64 / config.replicates.max(1) as f64;
    files.push(manifest.write(out)?);

    let summary = format!(
        "simulate: {} replicate(s) of a {} field on {} ({} sites); \
         truncation flagged on {flagged}; wrote {}",
        config.replicates,
        config.model.as_str(),
        window.descriptor(),
        window.len(),
        samples_dir.display()
    );
    Ok(CommandOutcome {
        files,
        summary,
        test_failure: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Outputs are a pure function of (config, seed): running with one
    /// worker and with many yields byte-identical trees.
    #[test]
    fn worker_count_does_not_change_bytes() {
        let mut config = ExperimentConfig::default();
        config.window_extent = 6;
        config.boundary_ratio_limit = 1.0;
        config.replicates = 8;
        config.workers = 1;
        let dir_a = tempfile::tempdir().unwrap();
        cmd_simulate(&config, dir_a.path()).unwrap();

        config.workers = 4;
        let dir_b = tempfile::tempdir().unwrap();
        cmd_simulate(&config, dir_b.path()).unwrap();

        for i in 0..config.replicates {
            let name = format!("samples/replicate_{i:05}.csv");
            let a = std::fs::read(dir_a.path().join(&name)).unwrap();
            let b = std::fs::read(dir_b.path().join(&name)).unwrap();
            assert_eq!(a, b, "replicate {i} differs across worker counts");
        }
    }

    #[test]
    fn manifest_traces_every_replicate_stream() {
        let mut config = ExperimentConfig::default();
        config.window_extent = 5;
        config.boundary_ratio_limit = 1.0;
        config.replicates = 3;
        let dir = tempfile::tempdir().unwrap();
        let outcome = cmd_simulate(&config, dir.path()).unwrap();
        assert!(outcome.test_failure.is_none());
        let manifest: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap())
                .unwrap();
        let streams = manifest["streams"].as_array().unwrap();
        // One pilot stream plus one per replicate.
        assert_eq!(streams.len(), 4);
        assert_eq!(manifest["outputs"].as_array().unwrap().len(), 3);
        assert_eq!(manifest["command"], "simulate");
    }
}
