//! `clt-verify`: check that the normalized estimation error
//! `√|Λ| (θ̂ − θ)` behaves like a centered normal with the predicted
//! long-run variance.

use std::path::Path;

use serde::Serialize;

use maxstable::estimators::{theta_hat1, theta_hat2, theta_hat3, EstimatorTag};
use maxstable::rng::{stream_id, stream_rng, StreamDomain};
use maxstable::simulate::FieldSimulator;
use maxstable::stats::{ks_p_value, ks_statistic, mean, normal_cdf, sample_variance};
use maxstable::theta::theta_pair;
use maxstable::{Sigma1Options, Sigma1Series, TruncationPolicy64};

use super::estimate::base_window;
use crate::commands::{run_replicates, CommandOutcome};
use crate::config::{estimator_as_str, ExperimentConfig};
use crate::output::{write_json, write_text, Manifest};
use crate::CliError;

/// Verdict of one normality check.
#[derive(Debug, Clone, Serialize)]
pub struct CltVerdict {
    pub estimator: EstimatorTag,
    pub lag: Vec<i64>,
    /// Threshold `y` (threshold estimator only).
    pub threshold: Option<f64>,
    /// Model value `θ(h)`.
    pub theta_target: f64,
    /// Predicted variance of the normalized error.
    pub sigma_sq_target: f64,
    /// Where the prediction came from.
    pub sigma_source: &'static str,
    /// Empirical variance of the normalized errors.
    pub empirical_variance: f64,
    /// empirical / target.
    pub variance_ratio: f64,
    pub variance_pass: bool,
    /// One-sample Kolmogorov–Smirnov distance to N(0, target).
    pub ks_statistic: f64,
    pub ks_p_value: f64,
    pub ks_pass: bool,
    pub pass: bool,
    pub replicates_used: usize,
    pub excluded_flagged: usize,
}

/// Bounds accepted for empirical/target variance; generous because the
/// empirical variance of M replicates has relative noise ≈ √(2/M).
const VARIANCE_RATIO_LO: f64 = 0.8;
const VARIANCE_RATIO_HI: f64 = 1.25;
/// KS significance floor.
const KS_ALPHA: f64 = 0.01;

/// Pure verdict from normalized errors and a variance prediction. Split
/// out so controls (scaled or shuffled errors) can be scored directly.
pub fn verdict_from_normalized(
    estimator: EstimatorTag,
    lag: Vec<i64>,
    threshold: Option<f64>,
    theta_target: f64,
    sigma_sq_target: f64,
    sigma_source: &'static str,
    normalized_errors: &[f64],
    excluded_flagged: usize,
) -> Result<CltVerdict, CliError> {
    if normalized_errors.len() < 2 {
        return Err(CliError::Numerical(
            "normality check needs at least two usable replicates".into(),
        ));
    }
    if !(sigma_sq_target > 0.0) || !sigma_sq_target.is_finite() {
        return Err(CliError::Numerical(format!(
            "predicted variance must be positive and finite, got {sigma_sq_target}"
        )));
    }
    let empirical_variance = sample_variance(normalized_errors);
    let variance_ratio = empirical_variance / sigma_sq_target;
    let variance_pass = (VARIANCE_RATIO_LO..=VARIANCE_RATIO_HI).contains(&variance_ratio);
    let sd = sigma_sq_target.sqrt();
    let ks = ks_statistic(normalized_errors, |x| normal_cdf(x / sd))?;
    let p = ks_p_value(ks, normalized_errors.len());
    let ks_pass = p > KS_ALPHA;
    Ok(CltVerdict {
        estimator,
        lag,
        threshold,
        theta_target,
        sigma_sq_target,
        sigma_source,
        empirical_variance,
        variance_ratio,
        variance_pass,
        ks_statistic: ks,
        ks_p_value: p,
        ks_pass,
        pass: variance_pass && ks_pass,
        replicates_used: normalized_errors.len(),
        excluded_flagged,
    })
}

pub fn cmd_clt_verify(config: &ExperimentConfig, out: &Path) -> Result<CommandOutcome, CliError> {
    let spec = config.build_spec()?;
    let window = config.build_window()?;
    let policy = TruncationPolicy64::default();
    let estimator = config.clt_estimator;
    let h = config.lag_site(0);
    let base = base_window(&window, &h)?;
    let y = config.thresholds[0];
    let theta_target = theta_pair(&spec, &h)?.value;

    let mut manifest = Manifest::new("clt-verify", config.seed, config.workers);
    manifest.replicates_requested = config.replicates;
    manifest.config_canonical = config.to_canonical_text();

    let mut pilot_rng = stream_rng(config.seed, StreamDomain::Pilot, 0);
    let simulator = FieldSimulator::new(&spec, &window, &policy, &mut pilot_rng)?;
    manifest.record_stream(
        "simulate",
        "pilot-calibration",
        None,
        stream_id(StreamDomain::Pilot, 0),
    );

    // One (θ̂, plug-in σ², flagged) triple per replicate. The plug-in
    // variance from each replicate is kept even when the target comes from
    // the analytic series, as a cross-check in the report.
    let draws: Vec<(f64, f64, usize, bool)> =
        run_replicates(config.workers, config.replicates, |i| {
            let mut rng = stream_rng(config.seed, StreamDomain::Simulation, i as u64);
            let sample = simulator.draw(&mut rng)?;
            let report = match estimator {
                EstimatorTag::Threshold => {
                    theta_hat1(&sample, &base, &h, y, config.level, None)?
                }
                EstimatorTag::MinInverse => theta_hat2(&sample, &base, &h, config.level)?,
                EstimatorTag::Madogram => theta_hat3(&sample, &base, &h, config.level)?,
            };
            Ok((
                report.theta_hat,
                report.sigma_sq,
                report.window_size,
                sample.truncation_flagged(),
            ))
        })?;
    for i in 0..config.replicates {
        manifest.record_stream(
            "simulate",
            "field-replicate",
            Some(i as u64),
            stream_id(StreamDomain::Simulation, i as u64),
        );
    }

    let usable: Vec<&(f64, f64, usize, bool)> = draws.iter().filter(|d| !d.3).collect();
    let excluded_flagged = draws.len() - usable.len();
    if (usable.len() as f64) < 0.8 * config.replicates as f64 {
        return Err(CliError::Numerical(format!(
            "truncation diagnostics flagged {excluded_flagged} of {} replicates; \
             the simulated law is unreliable at this window size",
            config.replicates
        )));
    }

    let normalized: Vec<f64> = usable
        .iter()
        .map(|(theta, _, n, _)| (*n as f64).sqrt() * (theta - theta_target))
        .collect();

    // Predicted variance of the normalized error.
    let (sigma_sq_target, sigma_source, threshold) = match estimator {
        EstimatorTag::Threshold => {
            let options = Sigma1Options {
                theta4_draws: config.theta4_draws,
                tail_fraction: config.tail_fraction,
                max_radius: config.max_radius,
            };
            let mut series = Sigma1Series::new(spec.clone(), h.clone(), config.seed, options)?;
            manifest.record_stream(
                "estimators",
                "variance-series",
                None,
                stream_id(StreamDomain::ThetaMonteCarlo, 0),
            );
            (series.evaluate(y)?.value, "analytic-series", Some(y))
        }
        _ => {
            // No closed variance series for these estimators: use the mean
            // plug-in variance across replicates as the prediction.
            let plugins: Vec<f64> = usable.iter().map(|(_, s, _, _)| *s).collect();
            (mean(&plugins), "plug-in-mean", None)
        }
    };

    let verdict = verdict_from_normalized(
        estimator,
        config.lags[0].clone(),
        threshold,
        theta_target,
        sigma_sq_target,
        sigma_source,
        &normalized,
        excluded_flagged,
    )?;

    manifest.truncation_flag_rate = excluded_flagged as f64 / config.replicates.max(1) as f64;

    let mut files = Vec::new();
    let mut err_csv = String::from("replicate,normalized_error\n");
    let mut k = 0usize;
    for (i, d) in draws.iter().enumerate() {
        if !d.3 {
            err_csv.push_str(&format!("{i},{}\n", normalized[k]));
            k += 1;
        }
    }
    files.push(write_text(out, "normalized_errors.csv", &err_csv)?);
    files.push(write_json(out, "clt_verdict.json", &verdict)?);
    manifest
        .outputs
        .extend(["normalized_errors.csv".into(), "clt_verdict.json".into()]);
    files.push(manifest.write(out)?);

    let summary = format!(
        "clt-verify [{}]: θ̂ target {:.4}, predicted variance {:.4} ({}), \
         empirical {:.4} (ratio {:.3} {}), KS p = {:.4} ({}) → {}",
        estimator_as_str(estimator),
        verdict.theta_target,
        verdict.sigma_sq_target,
        verdict.sigma_source,
        verdict.empirical_variance,
        verdict.variance_ratio,
        if verdict.variance_pass { "ok" } else { "off" },
        verdict.ks_p_value,
        if verdict.ks_pass { "ok" } else { "reject" },
        if verdict.pass { "PASS" } else { "FAIL" },
    );
    let test_failure = if verdict.pass {
        None
    } else {
        Some(format!(
            "normality check failed: variance ratio {:.3} (accepted {:.2}–{:.2}), \
             KS p-value {:.4} (floor {KS_ALPHA})",
            verdict.variance_ratio, VARIANCE_RATIO_LO, VARIANCE_RATIO_HI, verdict.ks_p_value
        ))
    };
    Ok(CommandOutcome {
        files,
        summary,
        test_failure,
    })
}
