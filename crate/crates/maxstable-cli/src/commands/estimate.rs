//! `estimate`: run the pair-coefficient estimators over simulated
//! replicates and aggregate against the model value.

use std::path::Path;
use std::sync::Arc;

use serde::Serialize;

use maxstable::estimators::{theta_hat1, theta_hat2, theta_hat3, EstimatorTag, VarianceMethod};
use maxstable::rng::{stream_id, stream_rng, StreamDomain};
use maxstable::simulate::FieldSimulator;
use maxstable::stats::{mean, sample_variance};
use maxstable::theta::theta_pair;
use maxstable::{
    EstimateReport, LatticeWindow, Sigma1Options, Sigma1Series, Site, TruncationPolicy64,
};

use crate::commands::{run_replicates, CommandOutcome};
use crate::config::ExperimentConfig;
use crate::output::{write_json, write_text, Manifest};
use crate::CliError;

/// One estimator × lag × threshold combination.
#[derive(Debug, Clone)]
struct Combo {
    estimator: EstimatorTag,
    lag_index: usize,
    threshold: Option<f64>,
    analytic_sigma_sq: Option<f64>,
}

/// Per-combination aggregate over replicates.
#[derive(Debug, Serialize)]
struct ComboAggregate {
    estimator: EstimatorTag,
    lag: Vec<i64>,
    threshold: Option<f64>,
    replicates_ok: usize,
    failures: usize,
    theta_reference: f64,
    theta_mean: f64,
    theta_sd: f64,
    theta_se: f64,
    sigma_sq_mean: f64,
    /// Normalized deviation of the replicate mean from the model value.
    z_score: f64,
    ci_coverage: f64,
}

#[derive(Debug, Serialize)]
struct FailureRow {
    replicate: usize,
    estimator: EstimatorTag,
    lag: Vec<i64>,
    threshold: Option<f64>,
    error: String,
}

#[derive(Debug, Serialize)]
struct EstimateSummary {
    aggregates: Vec<ComboAggregate>,
    failures: Vec<FailureRow>,
}

/// Sites `t` of `window` with `t + h` also in `window`.
pub(crate) fn base_window(window: &LatticeWindow, h: &Site) -> Result<Arc<LatticeWindow>, CliError> {
    let sites: Vec<Site> = window
        .sites()
        .iter()
        .filter(|t| window.index_of(&t.add(h)).is_some())
        .cloned()
        .collect();
    if sites.is_empty() {
        return Err(CliError::Config(format!(
            "lag {h} leaves no site pair inside the window; shrink the lag or enlarge the window"
        )));
    }
    Ok(Arc::new(LatticeWindow::from_sites(sites)?))
}

pub fn cmd_estimate(config: &ExperimentConfig, out: &Path) -> Result<CommandOutcome, CliError> {
    let spec = config.build_spec()?;
    let window = config.build_window()?;
    let policy = TruncationPolicy64::default();

    let mut manifest = Manifest::new("estimate", config.seed, config.workers);
    manifest.replicates_requested = config.replicates;
    manifest.config_canonical = config.to_canonical_text();

    // Per-lag base windows and model reference values.
    let mut bases = Vec::new();
    let mut references = Vec::new();
    for i in 0..config.lags.len() {
        let h = config.lag_site(i);
        bases.push(base_window(&window, &h)?);
        references.push(theta_pair(&spec, &h)?.value);
    }

    // Combination table. The analytic variance series, when requested, is
    // evaluated once per (lag, threshold) up front — it depends only on the
    // model, not on the data.
    let mut combos = Vec::new();
    for &estimator in &config.estimators {
        for lag_index in 0..config.lags.len() {
            match estimator {
                EstimatorTag::Threshold => {
                    let mut series = if config.variance_method == VarianceMethod::AnalyticSeries {
                        let options = Sigma1Options {
                            theta4_draws: config.theta4_draws,
                            tail_fraction: config.tail_fraction,
                            max_radius: config.max_radius,
                        };
                        let series = Sigma1Series::new(
                            spec.clone(),
                            config.lag_site(lag_index),
                            config.seed,
                            options,
                        )?;
                        manifest.record_stream(
                            "estimators",
                            "variance-series",
                            Some(lag_index as u64),
                            stream_id(StreamDomain::ThetaMonteCarlo, 0),
                        );
                        Some(series)
                    } else {
                        None
                    };
                    for &y in &config.thresholds {
                        let analytic_sigma_sq = match series.as_mut() {
                            Some(s) => Some(s.evaluate(y)?.value),
                            None => None,
                        };
                        combos.push(Combo {
                            estimator,
                            lag_index,
                            threshold: Some(y),
                            analytic_sigma_sq,
                        });
                    }
                }
                _ => combos.push(Combo {
                    estimator,
                    lag_index,
                    threshold: None,
                    analytic_sigma_sq: None,
                }),
            }
        }
    }

    let mut pilot_rng = stream_rng(config.seed, StreamDomain::Pilot, 0);
    let simulator = FieldSimulator::new(&spec, &window, &policy, &mut pilot_rng)?;
    manifest.record_stream(
        "simulate",
        "pilot-calibration",
        None,
        stream_id(StreamDomain::Pilot, 0),
    );

    // Each replicate: one field draw, then every combination on it.
    type RepResult = (bool, Vec<Result<EstimateReport, String>>);
    let replicate_rows: Vec<RepResult> =
        run_replicates(config.workers, config.replicates, |i| {
            let mut rng = stream_rng(config.seed, StreamDomain::Simulation, i as u64);
            let sample = simulator.draw(&mut rng)?;
            let mut rows = Vec::with_capacity(combos.len());
            for combo in &combos {
                let base = &bases[combo.lag_index];
                let h = config.lag_site(combo.lag_index);
                let report = match combo.estimator {
                    EstimatorTag::Threshold => theta_hat1(
                        &sample,
                        base,
                        &h,
                        combo.threshold.unwrap(),
                        config.level,
                        combo.analytic_sigma_sq,
                    ),
                    EstimatorTag::MinInverse => theta_hat2(&sample, base, &h, config.level),
                    EstimatorTag::Madogram => theta_hat3(&sample, base, &h, config.level),
                };
                rows.push(report.map_err(|e| e.to_string()));
            }
            Ok((sample.truncation_flagged(), rows))
        })?;
    let flagged = replicate_rows.iter().filter(|(f, _)| *f).count();
    manifest.truncation_flag_rate = flagged as f64 / config.replicates.max(1) as f64;
    let per_replicate: Vec<&Vec<Result<EstimateReport, String>>> =
        replicate_rows.iter().map(|(_, rows)| rows).collect();

    for i in 0..config.replicates {
        manifest.record_stream(
            "simulate",
            "field-replicate",
            Some(i as u64),
            stream_id(StreamDomain::Simulation, i as u64),
        );
    }

    // Flat CSV of successful rows; failures collected separately.
    let mut csv = String::from("replicate,");
    csv.push_str(EstimateReport::csv_header());
    csv.push('\n');
    let mut failures = Vec::new();
    for (i, rows) in per_replicate.iter().enumerate() {
        for (combo, row) in combos.iter().zip(rows.iter()) {
            match row {
                Ok(report) => {
                    csv.push_str(&format!("{i},{}\n", report.to_csv_row()));
                }
                Err(message) => failures.push(FailureRow {
                    replicate: i,
                    estimator: combo.estimator,
                    lag: config.lags[combo.lag_index].clone(),
                    threshold: combo.threshold,
                    error: message.clone(),
                }),
            }
        }
    }

    // Aggregates per combination.
    let mut aggregates = Vec::new();
    for (c, combo) in combos.iter().enumerate() {
        let reference = references[combo.lag_index];
        let oks: Vec<&EstimateReport> = per_replicate
            .iter()
            .map(|rows| &rows[c])
            .filter_map(|r| r.as_ref().ok())
            .collect();
        let n_ok = oks.len();
        let thetas: Vec<f64> = oks.iter().map(|r| r.theta_hat).collect();
        let sigmas: Vec<f64> = oks.iter().map(|r| r.sigma_sq).collect();
        let covered = oks
            .iter()
            .filter(|r| r.ci_lower <= reference && reference <= r.ci_upper)
            .count();
        let (theta_mean, theta_sd, theta_se, z_score) = if n_ok >= 2 {
            let m = mean(&thetas);
            let sd = sample_variance(&thetas).sqrt();
            let se = sd / (n_ok as f64).sqrt();
            let z = if se > 0.0 { (m - reference) / se } else { 0.0 };
            (m, sd, se, z)
        } else if n_ok == 1 {
            (thetas[0], 0.0, 0.0, 0.0)
        } else {
            (f64::NAN, f64::NAN, f64::NAN, f64::NAN)
        };
        aggregates.push(ComboAggregate {
            estimator: combo.estimator,
            lag: config.lags[combo.lag_index].clone(),
            threshold: combo.threshold,
            replicates_ok: n_ok,
            failures: config.replicates - n_ok,
            theta_reference: reference,
            theta_mean,
            theta_sd,
            theta_se,
            sigma_sq_mean: if sigmas.is_empty() { f64::NAN } else { mean(&sigmas) },
            z_score,
            ci_coverage: if n_ok > 0 {
                covered as f64 / n_ok as f64
            } else {
                f64::NAN
            },
        });
    }

    let mut files = Vec::new();
    files.push(write_text(out, "estimates.csv", &csv)?);
    let mut failure_csv = String::from("replicate,estimator,lag,threshold,error\n");
    for f in &failures {
        let lag = f
            .lag
            .iter()
            .map(|c| c.to_string())
            .collect::<Vec<_>>()
            .join(";");
        let y = f.threshold.map(|y| y.to_string()).unwrap_or_default();
        failure_csv.push_str(&format!(
            "{},{},{lag},{y},{}\n",
            f.replicate,
            crate::config::estimator_as_str(f.estimator),
            f.error.replace([',', '\n'], ";")
        ));
    }
    files.push(write_text(out, "failures.csv", &failure_csv)?);
    let summary_doc = EstimateSummary {
        aggregates,
        failures,
    };
    files.push(write_json(out, "estimates.json", &summary_doc)?);
    manifest.outputs.extend([
        "estimates.csv".into(),
        "failures.csv".into(),
        "estimates.json".into(),
    ]);
    files.push(manifest.write(out)?);

    let total_failures = summary_doc.failures.len();
    let summary = format!(
        "estimate: {} replicate(s) × {} combination(s) on {}; {} estimate(s) failed \
         (recorded in failures.csv); aggregates in estimates.json",
        config.replicates,
        combos.len(),
        window.descriptor(),
        total_failures
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

    #[test]
    fn estimate_outputs_are_worker_invariant_and_aggregated() {
        let mut config = ExperimentConfig::default();
        config.window_extent = 8;
        config.replicates = 6;
        config.thresholds = vec![1.0];
        config.workers = 1;
        let dir_a = tempfile::tempdir().unwrap();
        cmd_estimate(&config, dir_a.path()).unwrap();
        config.workers = 3;
        let dir_b = tempfile::tempdir().unwrap();
        cmd_estimate(&config, dir_b.path()).unwrap();

        for name in ["estimates.csv", "failures.csv", "estimates.json"] {
            let a = std::fs::read(dir_a.path().join(name)).unwrap();
            let b = std::fs::read(dir_b.path().join(name)).unwrap();
            assert_eq!(a, b, "{name} differs across worker counts");
        }

        let doc: serde_json::Value = serde_json::from_str(
            &std::fs::read_to_string(dir_a.path().join("estimates.json")).unwrap(),
        )
        .unwrap();
        let aggregates = doc["aggregates"].as_array().unwrap();
        // Three estimators × one lag × one threshold (threshold only).
        assert_eq!(aggregates.len(), 3);
        for agg in aggregates {
            let reference = agg["theta_reference"].as_f64().unwrap();
            assert!((1.0..=2.0).contains(&reference));
        }
    }

    #[test]
    fn degenerate_thresholds_are_recorded_not_fatal() {
        let mut config = ExperimentConfig::default();
        config.window_extent = 6;
        config.boundary_ratio_limit = 1.0;
        config.replicates = 3;
        config.estimators = vec![EstimatorTag::Threshold];
        // Absurdly low threshold: p̂ = 0, every replicate fails but the
        // command still succeeds and records the failures.
        config.thresholds = vec![1e-9];
        let dir = tempfile::tempdir().unwrap();
        let outcome = cmd_estimate(&config, dir.path()).unwrap();
        assert!(outcome.test_failure.is_none());
        let doc: serde_json::Value = serde_json::from_str(
            &std::fs::read_to_string(dir.path().join("estimates.json")).unwrap(),
        )
        .unwrap();
        assert_eq!(doc["failures"].as_array().unwrap().len(), 3);
        assert_eq!(doc["aggregates"][0]["replicates_ok"], 0);
    }
}
