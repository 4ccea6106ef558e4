//! Pair extremal-coefficient estimators on lattice windows.
//!
//! Each estimator turns one realized field into a point estimate of the pair
//! coefficient `θ(h)` together with a large-window normal confidence
//! interval for `√|Λ| (θ̂ − θ)`. The variance either comes from the analytic
//! lattice series (threshold estimator, see [`Sigma1Series`]) or from a
//! plug-in long-run autocovariance of the estimator's own summands.

mod sigma1;

pub use sigma1::{optimal_y, OptimalY, Sigma1Evaluation, Sigma1Options, Sigma1Series};

use std::collections::HashMap;

use serde::Serialize;

use crate::error::{MaxStableError, Result};
use crate::lattice::{LatticeWindow, Site};
use crate::scalar::Scalar;
use crate::simulate::FieldSample;
use crate::stats::normal_quantile;

/// Which of the three pair estimators produced a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorTag {
    /// Threshold estimator `−y ln p̂(y)`.
    Threshold,
    /// Reciprocal estimator `1 / mean of 1/max` pairs.
    MinInverse,
    /// Madogram estimator `(1 + 2ν̂) / (1 − 2ν̂)`.
    Madogram,
}

impl EstimatorTag {
    fn as_str(self) -> &'static str {
        match self {
            EstimatorTag::Threshold => "threshold",
            EstimatorTag::MinInverse => "min-inverse",
            EstimatorTag::Madogram => "madogram",
        }
    }
}

/// How the long-run variance in a report was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum VarianceMethod {
    /// Analytic lattice series with a provable tail bound.
    AnalyticSeries,
    /// Plug-in long-run autocovariance from the same sample.
    PlugInEmpirical,
}

impl VarianceMethod {
    fn as_str(self) -> &'static str {
        match self {
            VarianceMethod::AnalyticSeries => "analytic-series",
            VarianceMethod::PlugInEmpirical => "plug-in-empirical",
        }
    }
}

/// One estimator run on one field sample.
///
/// `theta_hat` is reported raw: values outside the admissible range `[1, 2]`
/// set `range_flagged` but are never clipped, so averages across replicates
/// stay unbiased.
#[derive(Debug, Clone, Serialize)]
pub struct EstimateReport {
    /// Which estimator ran.
    pub estimator: EstimatorTag,
    /// Lag coordinates of the estimated pair coefficient.
    pub lag: Vec<i64>,
    /// The point estimate of `θ(h)` (raw, never clipped).
    pub theta_hat: f64,
    /// Long-run variance of `√|Λ| (θ̂ − θ)`.
    pub sigma_sq: f64,
    /// Contribution of the zero lag to the plug-in variance (`None` for the
    /// analytic series). Useful as an independence diagnostic.
    pub sigma_sq_lag0: Option<f64>,
    /// How `sigma_sq` was obtained.
    pub variance_method: VarianceMethod,
    /// Plug-in bandwidth actually used (`None` for the analytic series).
    pub bandwidth: Option<usize>,
    /// Number of base sites `|Λ|` that entered the estimate.
    pub window_size: usize,
    /// Confidence level of the interval.
    pub level: f64,
    /// Lower endpoint of the normal interval `θ̂ ± z √(σ²/|Λ|)`.
    pub ci_lower: f64,
    /// Upper endpoint of the interval.
    pub ci_upper: f64,
    /// Whether `theta_hat` fell outside `[1, 2]`.
    pub range_flagged: bool,
    /// Whether a negative plug-in variance was floored at zero.
    pub variance_floored: bool,
    /// Threshold `y` (threshold estimator only).
    pub threshold_y: Option<f64>,
    /// Human-readable caveat, if any.
    pub note: Option<String>,
}

impl EstimateReport {
    /// Column names matching [`EstimateReport::to_csv_row`].
    pub fn csv_header() -> &'static str {
        "estimator,lag,theta_hat,sigma_sq,sigma_sq_lag0,variance_method,\
         bandwidth,window_size,level,ci_lower,ci_upper,range_flagged,\
         variance_floored,threshold_y,note"
    }

    /// One CSV row; the lag is `;`-joined and free text is `,`-sanitized.
    pub fn to_csv_row(&self) -> String {
        let lag = self
            .lag
            .iter()
            .map(|c| c.to_string())
            .collect::<Vec<_>>()
            .join(";");
        let opt_f = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let opt_u = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
        let note = self
            .note
            .as_deref()
            .unwrap_or("")
            .replace([',', '\n'], ";");
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.estimator.as_str(),
            lag,
            self.theta_hat,
            self.sigma_sq,
            opt_f(self.sigma_sq_lag0),
            self.variance_method.as_str(),
            opt_u(self.bandwidth),
            self.window_size,
            self.level,
            self.ci_lower,
            self.ci_upper,
            self.range_flagged,
            self.variance_floored,
            opt_f(self.threshold_y),
            note,
        )
    }
}

/// Values `(η(t), η(t + h))` for every `t` in the base window, in the base
/// window's site order.
///
/// Fails with [`MaxStableError::MissingShiftedSites`] unless the sample's
/// window contains the whole shifted base `Λ ∪ (Λ + h)`.
fn shifted_pairs<F: Scalar>(
    sample: &FieldSample<F>,
    base: &LatticeWindow,
    h: &Site,
) -> Result<Vec<(f64, f64)>> {
    if base.dim() != sample.window().dim() || h.dim() != base.dim() {
        return Err(MaxStableError::DimensionMismatch {
            context: "pair estimator base window and lag",
            expected: sample.window().dim(),
            actual: if h.dim() != sample.window().dim() {
                h.dim()
            } else {
                base.dim()
            },
        });
    }
    let mut pairs = Vec::with_capacity(base.len());
    let mut missing = 0usize;
    let mut first_missing = String::new();
    for t in base.sites() {
        let here = sample.value_at(t);
        let there = sample.value_at(&t.add(h));
        match (here, there) {
            (Some(a), Some(b)) => pairs.push((a.to_f64_lossy(), b.to_f64_lossy())),
            _ => {
                if here.is_none() {
                    if missing == 0 {
                        first_missing = t.to_string();
                    }
                    missing += 1;
                }
                if there.is_none() {
                    if missing == 0 {
                        first_missing = t.add(h).to_string();
                    }
                    missing += 1;
                }
            }
        }
    }
    if missing > 0 {
        return Err(MaxStableError::MissingShiftedSites {
            lag: h.coords().to_vec(),
            missing,
            required: 2 * base.len(),
            first_missing,
        });
    }
    Ok(pairs)
}

/// Empirical non-exceedance probability
/// `p̂(y) = |Λ|⁻¹ Σ_t 1{η(t) ≤ y, η(t+h) ≤ y}`.
pub fn p_hat<F: Scalar>(
    sample: &FieldSample<F>,
    base: &LatticeWindow,
    h: &Site,
    y: f64,
) -> Result<f64> {
    let indicators = joint_indicators(sample, base, h, y)?;
    Ok(indicators.iter().sum::<f64>() / indicators.len() as f64)
}

fn joint_indicators<F: Scalar>(
    sample: &FieldSample<F>,
    base: &LatticeWindow,
    h: &Site,
    y: f64,
) -> Result<Vec<f64>> {
    if !(y > 0.0) || !y.is_finite() {
        return Err(MaxStableError::invalid(
            "y",
            y,
            "threshold must be positive and finite",
        ));
    }
    let pairs = shifted_pairs(sample, base, h)?;
    Ok(pairs
        .iter()
        .map(|&(a, b)| if a <= y && b <= y { 1.0 } else { 0.0 })
        .collect())
}

/// Default plug-in bandwidth `L = ⌊|Λ|^{1/(2d)}⌋`.
pub fn default_bandwidth(window_size: usize, dim: usize) -> usize {
    (window_size as f64)
        .powf(1.0 / (2.0 * dim as f64))
        .floor() as usize
}

/// Threshold estimator `θ̂₁ = −y ln p̂(y)`.
///
/// When `analytic_sigma_sq` is given (the lattice series evaluated at the
/// same `y`), the confidence interval uses it; otherwise the variance is the
/// plug-in `(y/p̂)² Σ_ℓ ĉ_B(ℓ)` over the joint-indicator summands.
pub fn theta_hat1<F: Scalar>(
    sample: &FieldSample<F>,
    base: &LatticeWindow,
    h: &Site,
    y: f64,
    level: f64,
    analytic_sigma_sq: Option<f64>,
) -> Result<EstimateReport> {
    let indicators = joint_indicators(sample, base, h, y)?;
    let n = indicators.len();
    let p = indicators.iter().sum::<f64>() / n as f64;
    if p == 0.0 {
        return Err(MaxStableError::DegenerateStatistic {
            context: "threshold estimator",
            message: format!(
                "no site pair stayed below the threshold y = {y} on {n} sites; \
                 raise y so that p̂(y) > 0"
            ),
        });
    }
    let theta = -y * p.ln();
    let (sigma_sq, lag0, bandwidth, floored, method) = match analytic_sigma_sq {
        Some(s) => (s, None, None, false, VarianceMethod::AnalyticSeries),
        None => {
            let bw = default_bandwidth(n, base.dim());
            let (sum, lag0, floored) = longrun_plugin(base, &indicators, bw);
            let scale = (y / p) * (y / p);
            (
                scale * sum,
                Some(scale * lag0),
                Some(bw),
                floored,
                VarianceMethod::PlugInEmpirical,
            )
        }
    };
    finish_report(
        EstimatorTag::Threshold,
        h,
        theta,
        sigma_sq,
        lag0,
        method,
        bandwidth,
        n,
        level,
        floored,
        Some(y),
        if p == 1.0 {
            Some("every pair sat below the threshold (p̂ = 1); lower y".to_string())
        } else {
            None
        },
    )
}

/// Reciprocal estimator `θ̂₂ = 1 / mean of 1/max(η(t), η(t+h))`.
///
/// The summands are standard exponential with rate `θ(h)` marginally, so the
/// plug-in variance is `θ̂⁴ Σ_ℓ ĉ_Y(ℓ)`.
pub fn theta_hat2<F: Scalar>(
    sample: &FieldSample<F>,
    base: &LatticeWindow,
    h: &Site,
    level: f64,
) -> Result<EstimateReport> {
    let pairs = shifted_pairs(sample, base, h)?;
    let n = pairs.len();
    let mut summands = Vec::with_capacity(n);
    for &(a, b) in &pairs {
        let m = a.max(b);
        if !(m > 0.0) {
            return Err(MaxStableError::DegenerateStatistic {
                context: "min-inverse estimator",
                message: format!("non-positive field value {m} cannot be inverted"),
            });
        }
        summands.push(1.0 / m);
    }
    let mean = summands.iter().sum::<f64>() / n as f64;
    let theta = 1.0 / mean;
    let bw = default_bandwidth(n, base.dim());
    let (sum, lag0, floored) = longrun_plugin(base, &summands, bw);
    let scale = theta.powi(4);
    finish_report(
        EstimatorTag::MinInverse,
        h,
        theta,
        scale * sum,
        Some(scale * lag0),
        VarianceMethod::PlugInEmpirical,
        Some(bw),
        n,
        level,
        floored,
        None,
        small_window_note(n),
    )
}

/// Madogram estimator `θ̂₃ = (1 + 2ν̂) / (1 − 2ν̂)` with
/// `ν̂ = (2|Λ|)⁻¹ Σ_t |F(η(t)) − F(η(t+h))|` and `F` the standard Fréchet
/// CDF, so that `ν̂` estimates the F-madogram `ν_F(h) = ½ E|F(η(0)) −
/// F(η(h))| = ½ (θ − 1)/(θ + 1) ∈ [0, 1/4]`.
///
/// Values `ν̂ ≥ 1/2` make the map diverge and are rejected. The plug-in
/// variance is `(θ̂ + 1)⁴ Σ_ℓ ĉ_D(ℓ)` over the madogram increments; the
/// factor `(θ̂ + 1)⁴` is the squared derivative of `ν ↦ (1 + 2ν)/(1 − 2ν)`.
pub fn theta_hat3<F: Scalar>(
    sample: &FieldSample<F>,
    base: &LatticeWindow,
    h: &Site,
    level: f64,
) -> Result<EstimateReport> {
    let pairs = shifted_pairs(sample, base, h)?;
    let n = pairs.len();
    let summands: Vec<f64> = pairs
        .iter()
        .map(|&(a, b)| 0.5 * (frechet_cdf(a) - frechet_cdf(b)).abs())
        .collect();
    let nu = summands.iter().sum::<f64>() / n as f64;
    if nu >= 0.5 {
        return Err(MaxStableError::DegenerateStatistic {
            context: "madogram estimator",
            message: format!(
                "empirical madogram ν̂ = {nu} reached the divergence point 1/2 \
                 of (1 + 2ν)/(1 − 2ν)"
            ),
        });
    }
    let theta = (1.0 + 2.0 * nu) / (1.0 - 2.0 * nu);
    let bw = default_bandwidth(n, base.dim());
    let (sum, lag0, floored) = longrun_plugin(base, &summands, bw);
    let scale = (theta + 1.0).powi(4);
    finish_report(
        EstimatorTag::Madogram,
        h,
        theta,
        scale * sum,
        Some(scale * lag0),
        VarianceMethod::PlugInEmpirical,
        Some(bw),
        n,
        level,
        floored,
        None,
        small_window_note(n),
    )
}

fn frechet_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        (-1.0 / x).exp()
    }
}

fn small_window_note(n: usize) -> Option<String> {
    if n == 1 {
        Some("single-site window: the plug-in variance is identically zero".to_string())
    } else {
        None
    }
}

#[allow(clippy::too_many_arguments)]
fn finish_report(
    estimator: EstimatorTag,
    h: &Site,
    theta: f64,
    sigma_sq: f64,
    sigma_sq_lag0: Option<f64>,
    variance_method: VarianceMethod,
    bandwidth: Option<usize>,
    window_size: usize,
    level: f64,
    variance_floored: bool,
    threshold_y: Option<f64>,
    note: Option<String>,
) -> Result<EstimateReport> {
    if !(level > 0.0 && level < 1.0) {
        return Err(MaxStableError::invalid(
            "level",
            level,
            "confidence level must lie in (0, 1)",
        ));
    }
    if sigma_sq < 0.0 || !sigma_sq.is_finite() {
        return Err(MaxStableError::invalid(
            "sigma_sq",
            sigma_sq,
            "long-run variance must be finite and non-negative",
        ));
    }
    let z = normal_quantile((1.0 + level) / 2.0)?;
    let half = z * (sigma_sq / window_size as f64).sqrt();
    Ok(EstimateReport {
        estimator,
        lag: h.coords().to_vec(),
        theta_hat: theta,
        sigma_sq,
        sigma_sq_lag0,
        variance_method,
        bandwidth,
        window_size,
        level,
        ci_lower: theta - half,
        ci_upper: theta + half,
        range_flagged: !(1.0..=2.0).contains(&theta),
        variance_floored,
        threshold_y,
        note,
    })
}

/// Plug-in long-run variance `Σ_{|ℓ|∞ ≤ L} ĉ(ℓ)` of a stationary summand
/// sequence indexed by the base window, with
/// `ĉ(ℓ) = |Λ|⁻¹ Σ_{t, t+ℓ ∈ Λ} (c_t − c̄)(c_{t+ℓ} − c̄)`.
///
/// Returns `(sum, lag-0 term, floored)`; a negative sum is floored at zero
/// and flagged. Full-box windows use O(d) arithmetic indexing; sparse
/// windows fall back to a hash lookup.
pub(crate) fn longrun_plugin(
    base: &LatticeWindow,
    values: &[f64],
    bandwidth: usize,
) -> (f64, f64, bool) {
    debug_assert_eq!(base.len(), values.len());
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = values.iter().map(|v| v - mean).collect();
    let dim = base.dim();
    let grid = base.grid_indexer();
    let hash: Option<HashMap<&[i64], usize>> = if grid.is_none() {
        Some(
            base.sites()
                .iter()
                .enumerate()
                .map(|(i, s)| (s.coords(), i))
                .collect(),
        )
    } else {
        None
    };

    let l = bandwidth as i64;
    let mut lag = vec![-l; dim];
    let mut shifted = vec![0i64; dim];
    let mut total = 0.0;
    let mut lag0 = 0.0;
    loop {
        let mut acc = 0.0;
        for (i, site) in base.sites().iter().enumerate() {
            for (k, &c) in site.coords().iter().enumerate() {
                shifted[k] = c + lag[k];
            }
            let j = match (&grid, &hash) {
                (Some(g), _) => g.index_of_coords(&shifted),
                (None, Some(map)) => map.get(shifted.as_slice()).copied(),
                (None, None) => unreachable!(),
            };
            if let Some(j) = j {
                acc += centered[i] * centered[j];
            }
        }
        let cov = acc / n as f64;
        total += cov;
        if lag.iter().all(|&c| c == 0) {
            lag0 = cov;
        }

        // Odometer over [−L, L]^d.
        let mut axis = dim;
        loop {
            if axis == 0 {
                return if total < 0.0 {
                    (0.0, lag0, true)
                } else {
                    (total, lag0, false)
                };
            }
            axis -= 1;
            lag[axis] += 1;
            if lag[axis] <= l {
                break;
            }
            lag[axis] = -l;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    use crate::model::{KernelSpec, ModelSpec};
    use crate::rng::{stream_rng, StreamDomain};
    use crate::simulate::{simulate_moving_maximum, TruncationPolicy};

    fn synthetic_sample(window: Arc<LatticeWindow>, values: Vec<f64>) -> FieldSample<f64> {
        FieldSample::new(window, values, 0, 0, false, 0.0)
    }

    fn line_window(lo: i64, hi: i64) -> Arc<LatticeWindow> {
        let sites = (lo..=hi).map(|c| Site::new([c])).collect();
        Arc::new(LatticeWindow::from_sites(sites).unwrap())
    }

    #[test]
    fn threshold_estimator_inverts_the_empirical_probability_exactly() {
        let sample = synthetic_sample(line_window(0, 4), vec![1.0, 2.0, 9.0, 9.0, 1.0]);
        let base = line_window(0, 3);
        let h = Site::new([1]);
        // Only the pair at t = 0 sits fully below y = 3, so p̂ = 1/4.
        let report = theta_hat1(&sample, &base, &h, 3.0, 0.95, None).unwrap();
        assert_eq!(report.theta_hat, -3.0 * 0.25f64.ln());
        assert_eq!(report.window_size, 4);
        assert_eq!(report.threshold_y, Some(3.0));
        assert_eq!(report.variance_method, VarianceMethod::PlugInEmpirical);
        // 3 ln 4 ≈ 4.16 lies far outside [1, 2]: flagged but not clipped.
        assert!(report.range_flagged);
        assert!(report.theta_hat > 4.0);
        assert!(report.ci_lower < report.theta_hat && report.theta_hat < report.ci_upper);

        let p = p_hat(&sample, &base, &h, 3.0).unwrap();
        assert_eq!(p, 0.25);
    }

    #[test]
    fn threshold_estimator_accepts_an_analytic_variance() {
        let sample = synthetic_sample(line_window(0, 4), vec![1.0, 2.0, 9.0, 9.0, 1.0]);
        let base = line_window(0, 3);
        let h = Site::new([1]);
        let report = theta_hat1(&sample, &base, &h, 3.0, 0.9, Some(7.0)).unwrap();
        assert_eq!(report.variance_method, VarianceMethod::AnalyticSeries);
        assert_eq!(report.sigma_sq, 7.0);
        assert_eq!(report.sigma_sq_lag0, None);
        assert_eq!(report.bandwidth, None);
        let z = normal_quantile(0.95f64).unwrap();
        let half = z * (7.0f64 / 4.0).sqrt();
        assert!((report.ci_upper - report.theta_hat - half).abs() < 1e-12);
    }

    #[test]
    fn missing_shifted_sites_are_reported_with_counts() {
        let sample = synthetic_sample(line_window(0, 3), vec![1.0, 2.0, 3.0, 4.0]);
        let base = line_window(0, 3);
        let h = Site::new([1]);
        let err = theta_hat2(&sample, &base, &h, 0.95).unwrap_err();
        match err {
            MaxStableError::MissingShiftedSites {
                lag,
                missing,
                required,
                first_missing,
            } => {
                assert_eq!(lag, vec![1]);
                assert_eq!(missing, 1);
                assert_eq!(required, 8);
                assert_eq!(first_missing, "(4)");
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn threshold_estimator_rejects_a_threshold_no_pair_stays_below() {
        let sample = synthetic_sample(line_window(0, 2), vec![5.0, 6.0, 7.0]);
        let base = line_window(0, 1);
        let h = Site::new([1]);
        let err = theta_hat1(&sample, &base, &h, 1.0, 0.95, None).unwrap_err();
        assert!(matches!(
            err,
            MaxStableError::DegenerateStatistic { context, .. } if context == "threshold estimator"
        ));
    }

    #[test]
    fn constant_field_gives_exact_estimates_with_zero_variance() {
        // Identical values at t and t + h: the madogram sees complete
        // dependence (θ̂₃ = 1 exactly) and the reciprocal estimator returns
        // the constant itself; both plug-in variances vanish.
        let sample = synthetic_sample(line_window(0, 5), vec![1.5; 6]);
        let base = line_window(0, 4);
        let h = Site::new([1]);

        let madogram = theta_hat3(&sample, &base, &h, 0.95).unwrap();
        assert_eq!(madogram.theta_hat, 1.0);
        assert_eq!(madogram.sigma_sq, 0.0);
        assert_eq!(madogram.ci_lower, 1.0);
        assert_eq!(madogram.ci_upper, 1.0);
        assert!(!madogram.range_flagged);

        let reciprocal = theta_hat2(&sample, &base, &h, 0.95).unwrap();
        assert_eq!(reciprocal.theta_hat, 1.5);
        assert_eq!(reciprocal.sigma_sq, 0.0);
        assert_eq!(reciprocal.sigma_sq_lag0, Some(0.0));
    }

    #[test]
    fn madogram_estimator_rejects_divergent_nu() {
        // Values extreme enough that F(a) underflows to 0 and F(b) rounds to
        // 1 exactly, so the lone summand ½|F(a) − F(b)| hits the divergence
        // point ν̂ = 1/2 of the map (1 + 2ν)/(1 − 2ν).
        let sample = synthetic_sample(line_window(0, 1), vec![1e-9, 1e18]);
        let base = line_window(0, 0);
        let h = Site::new([1]);
        let err = theta_hat3(&sample, &base, &h, 0.95).unwrap_err();
        assert!(matches!(
            err,
            MaxStableError::DegenerateStatistic { context, .. } if context == "madogram estimator"
        ));
    }

    #[test]
    fn plugin_longrun_matches_direct_enumeration() {
        // 3×3 box with deterministic values; brute-force ĉ(ℓ) next to the
        // production loop, on both the arithmetic-grid and hash paths.
        let boxed = LatticeWindow::from_box(&[3, 3]).unwrap();
        let values: Vec<f64> = (0..9).map(|i| ((i * i) % 7) as f64).collect();
        let l = 1i64;

        let mean = values.iter().sum::<f64>() / 9.0;
        let mut expected = 0.0;
        let mut expected_lag0 = 0.0;
        for l0 in -l..=l {
            for l1 in -l..=l {
                let mut acc = 0.0;
                for (i, t) in boxed.sites().iter().enumerate() {
                    let shifted = Site::new([t.coords()[0] + l0, t.coords()[1] + l1]);
                    if let Some(j) = boxed.index_of(&shifted) {
                        acc += (values[i] - mean) * (values[j] - mean);
                    }
                }
                expected += acc / 9.0;
                if l0 == 0 && l1 == 0 {
                    expected_lag0 = acc / 9.0;
                }
            }
        }

        let (sum, lag0, floored) = longrun_plugin(&boxed, &values, 1);
        assert!((sum - expected).abs() < 1e-12);
        assert!((lag0 - expected_lag0).abs() < 1e-12);
        assert!(!floored);

        // Sparse window (punctured box) exercises the hash fallback.
        let mut sites: Vec<Site> = boxed.sites().to_vec();
        sites.remove(4);
        let sparse = LatticeWindow::from_sites(sites).unwrap();
        assert!(sparse.grid_indexer().is_none());
        let sparse_values: Vec<f64> = (0..8).map(|i| (i as f64).sin()).collect();
        let mean = sparse_values.iter().sum::<f64>() / 8.0;
        let mut expected = 0.0;
        for l0 in -l..=l {
            for l1 in -l..=l {
                let mut acc = 0.0;
                for (i, t) in sparse.sites().iter().enumerate() {
                    let shifted = Site::new([t.coords()[0] + l0, t.coords()[1] + l1]);
                    if let Some(j) = sparse.index_of(&shifted) {
                        acc += (sparse_values[i] - mean) * (sparse_values[j] - mean);
                    }
                }
                expected += acc / 8.0;
            }
        }
        let (sum, _, _) = longrun_plugin(&sparse, &sparse_values, 1);
        assert!((sum - expected).abs() < 1e-12);
    }

    #[test]
    fn iid_min_inverse_variance_matches_the_independent_oracle() {
        // Indicator kernel with radius 0.4: lattice sites never share an
        // atom, so the field is iid Fréchet and θ(h) = 2. The summands
        // Y_t = 1/max(η_t, η_{t+h}) then satisfy (with A, B, C iid Exp(1))
        //   Var Y = Var min(A,B) = 1/4,
        //   Cov(min(A,B), min(B,C)) = 1/3 − 1/4 = 1/12 at lags ±h,
        // so σ₂² = θ⁴ (1/4 + 2/12) = 20/3.
        let kernel = KernelSpec::<f64>::indicator_box(1, 0.4).unwrap();
        let spec = ModelSpec::moving_maximum(kernel);
        let window = Arc::new(LatticeWindow::from_box(&[4003]).unwrap());
        let base = line_window(1, 4001);
        let h = Site::new([1]);
        let mut rng = stream_rng(61, StreamDomain::Simulation, 0);
        let policy = TruncationPolicy::default();
        let (sample, _) = simulate_moving_maximum(&spec, &window, &mut rng, &policy).unwrap();

        let report = theta_hat2(&sample, &base, &h, 0.95).unwrap();
        let oracle = 20.0 / 3.0;
        assert!(
            (report.theta_hat - 2.0).abs() < 0.15,
            "theta_hat {}",
            report.theta_hat
        );
        assert!(
            (report.sigma_sq - oracle).abs() < 0.2 * oracle,
            "sigma_sq {} vs oracle {oracle}",
            report.sigma_sq
        );
        // The lag-0 term alone is θ⁴ Var Y ≈ 4.
        let lag0 = report.sigma_sq_lag0.unwrap();
        assert!((lag0 - 4.0).abs() < 0.2 * 4.0, "lag0 {lag0}");
        assert!(!report.variance_floored);
        assert_eq!(report.bandwidth, Some(default_bandwidth(4001, 1)));
    }

    #[test]
    fn level_and_threshold_are_validated() {
        let sample = synthetic_sample(line_window(0, 2), vec![1.0, 1.0, 1.0]);
        let base = line_window(0, 1);
        let h = Site::new([1]);
        assert!(theta_hat1(&sample, &base, &h, -1.0, 0.95, None).is_err());
        assert!(theta_hat1(&sample, &base, &h, 1.0, 1.2, None).is_err());
        assert!(theta_hat2(&sample, &base, &h, 0.0).is_err());
    }
}
