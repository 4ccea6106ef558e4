//! Monte Carlo check of the defining max-stability identity.
//!
//! If `η⁽¹⁾, …, η⁽ⁿ⁾` are independent copies of a simple max-stable field,
//! then `max_j η⁽ʲ⁾ / n` has the law of `η` again. The check simulates both
//! sides, compares the marginal at the window's first site with a two-sample
//! Kolmogorov–Smirnov test, and compares pooled pair-coefficient estimates
//! between the first and last window sites.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{MaxStableError, Result};
use crate::lattice::{LatticeWindow, Site};
use crate::model::ModelSpec;
use crate::rng::{stream_rng, StreamDomain};
use crate::scalar::SampleScalar;
use crate::simulate::{FieldSimulator, TruncationPolicy};

/// Outcome of one max-stability verification run.
#[derive(Debug, Clone, Serialize)]
pub struct MaxStabilityReport {
    /// Number of independent copies pooled into the rescaled maximum.
    pub n: usize,
    /// Monte Carlo replicates per sample.
    pub replicates: usize,
    /// Lag between the two sites used for the pair-coefficient comparison.
    pub lag: Site,
    /// Two-sample Kolmogorov–Smirnov distance, direct vs rescaled marginal.
    pub marginal_ks: f64,
    /// Asymptotic p-value of the marginal comparison.
    pub marginal_ks_p: f64,
    /// Pooled pair-coefficient estimate from the direct sample.
    pub theta_direct: f64,
    /// Standard error of `theta_direct`.
    pub theta_direct_se: f64,
    /// Pooled pair-coefficient estimate from the rescaled maxima.
    pub theta_scaled: f64,
    /// Standard error of `theta_scaled`.
    pub theta_scaled_se: f64,
}

/// Pooled pair-coefficient estimate `1 / mean(min_t 1/η(t))` over two sites,
/// with a delta-method standard error.
fn pooled_pair_theta(ys: &[f64]) -> (f64, f64) {
    let y_bar = crate::stats::mean(ys);
    let se_y = (crate::stats::sample_variance(ys) / ys.len() as f64).sqrt();
    (1.0 / y_bar, se_y / (y_bar * y_bar))
}

/// Simulates `replicates` direct fields and `replicates` rescaled maxima of
/// `n` copies, then compares the two samples.
pub fn max_stability_check<F: SampleScalar>(
    spec: &ModelSpec<F>,
    window: &Arc<LatticeWindow>,
    root_seed: u64,
    n: usize,
    replicates: usize,
    policy: &TruncationPolicy<F>,
) -> Result<MaxStabilityReport> {
    if n == 0 {
        return Err(MaxStableError::invalid(
            "n",
            0.0,
            "need at least one copy in the rescaled maximum",
        ));
    }
    if replicates < 2 {
        return Err(MaxStableError::invalid(
            "replicates",
            replicates as f64,
            "need at least two replicates for a two-sample comparison",
        ));
    }
    let mut pilot = stream_rng(root_seed, StreamDomain::Pilot, 0);
    let simulator = FieldSimulator::new(spec, window, policy, &mut pilot)?;

    let sites = window.sites();
    let first = sites
        .first()
        .ok_or(MaxStableError::EmptySiteSet {
            context: "max_stability_check",
        })?
        .clone();
    let last = sites.last().unwrap().clone();
    let lag = last.sub(&first);
    let first_idx = 0usize;
    let last_idx = sites.len() - 1;

    let mut direct_first = Vec::with_capacity(replicates);
    let mut scaled_first = Vec::with_capacity(replicates);
    let mut direct_y = Vec::with_capacity(replicates);
    let mut scaled_y = Vec::with_capacity(replicates);
    let inv_n = 1.0 / n as f64;
    for rep in 0..replicates as u64 {
        let mut rng = stream_rng(root_seed, StreamDomain::MaxStability, rep);
        let field = simulator.draw(&mut rng)?;
        let a = field.values()[first_idx].to_f64_lossy();
        let b = field.values()[last_idx].to_f64_lossy();
        direct_first.push(a);
        direct_y.push((1.0 / a).min(1.0 / b));

        let mut max_a = f64::NEG_INFINITY;
        let mut max_b = f64::NEG_INFINITY;
        for copy in 0..n as u64 {
            let idx = replicates as u64 + rep * n as u64 + copy;
            let mut rng = stream_rng(root_seed, StreamDomain::MaxStability, idx);
            let field = simulator.draw(&mut rng)?;
            max_a = max_a.max(field.values()[first_idx].to_f64_lossy());
            max_b = max_b.max(field.values()[last_idx].to_f64_lossy());
        }
        let sa = max_a * inv_n;
        let sb = max_b * inv_n;
        scaled_first.push(sa);
        scaled_y.push((1.0 / sa).min(1.0 / sb));
    }

    let marginal_ks = crate::stats::two_sample_ks(&direct_first, &scaled_first)?;
    let marginal_ks_p =
        crate::stats::two_sample_ks_p_value(marginal_ks, direct_first.len(), scaled_first.len());
    let (theta_direct, theta_direct_se) = pooled_pair_theta(&direct_y);
    let (theta_scaled, theta_scaled_se) = pooled_pair_theta(&scaled_y);

    Ok(MaxStabilityReport {
        n,
        replicates,
        lag,
        marginal_ks,
        marginal_ks_p,
        theta_direct,
        theta_direct_se,
        theta_scaled,
        theta_scaled_se,
    })
}
