//! Extremal coefficients `θ(h)`, `θ(S)`, the constant `C(S)`, and the
//! dependence function `τ_a(h)`.
//!
//! For a simple max-stable field with unit Fréchet marginals,
//! `P[η(s) ≤ y for all s ∈ S] = exp(-θ(S)/y)`, so `θ(S) ∈ [1, |S|]`
//! interpolates between full dependence and independence. Every evaluator
//! here carries a method tag and an error estimate so that downstream
//! variance series and mixing bounds can propagate uncertainty.

mod quadrature;
mod sets;

use std::sync::Arc;

use serde::Serialize;

use crate::error::{MaxStableError, Result};
use crate::lattice::{LatticeWindow, Site};
use crate::model::{ModelSpec, VariogramSpec};
use crate::rng::StreamRng;
use crate::scalar::{SampleScalar, Scalar};
use crate::simulate::{FieldSimulator, TruncationPolicy};
use crate::stats::{mean, normal_cdf, sample_variance};

pub use sets::{theta_set_br_mc, theta_set_mm};

/// How a coefficient value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThetaMethod {
    ClosedForm,
    Quadrature,
    MonteCarlo,
}

/// An extremal-coefficient value with provenance and an error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThetaValue<F> {
    /// The coefficient value.
    pub value: F,
    /// Evaluation method.
    pub method: ThetaMethod,
    /// Absolute error estimate: 0 for closed forms, a Richardson estimate
    /// for quadrature, the standard error for Monte Carlo.
    pub error: f64,
}

impl<F: Scalar> ThetaValue<F> {
    /// An exact closed-form value.
    pub fn closed(value: F) -> Self {
        ThetaValue {
            value,
            method: ThetaMethod::ClosedForm,
            error: 0.0,
        }
    }
}

/// A Monte Carlo scalar with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimated<F> {
    pub value: F,
    pub std_error: f64,
}

/// Pair extremal coefficient of a Brown–Resnick field,
/// `θ(h) = 2Φ(√V(h) / 2)`.
pub fn theta_pair_br<F: Scalar>(variogram: &VariogramSpec<F>, h: &Site) -> ThetaValue<F> {
    let v = variogram.value(h);
    ThetaValue::closed(F::of(2.0) * normal_cdf(v.sqrt() / F::of(2.0)))
}

/// Pair extremal coefficient `θ(0, h)` of either model family.
///
/// Brown–Resnick and the closed-form kernel geometries are exact; remaining
/// moving-maximum cases fall back to the set-coefficient quadrature on
/// `{0, h}`.
pub fn theta_pair<F: Scalar>(spec: &ModelSpec<F>, h: &Site) -> Result<ThetaValue<F>> {
    if h.dim() != spec.dim() {
        return Err(MaxStableError::DimensionMismatch {
            context: "theta_pair",
            expected: spec.dim(),
            actual: h.dim(),
        });
    }
    match spec {
        ModelSpec::BrownResnick { variogram, .. } => Ok(theta_pair_br(variogram, h)),
        ModelSpec::MovingMaximum { kernel } => match kernel.pair_theta_closed(h) {
            Some(value) => Ok(ThetaValue::closed(value)),
            None => theta_set_mm(kernel, &[Site::origin(h.dim()), h.clone()]),
        },
    }
}

/// `θ(S)` for either family: exact/quadrature for moving maxima, spectral
/// Monte Carlo for Brown–Resnick (`n_draws` ignored for moving maxima).
pub fn theta_set<F: SampleScalar>(
    spec: &ModelSpec<F>,
    sites: &[Site],
    n_draws: usize,
    rng: &mut StreamRng,
) -> Result<ThetaValue<F>> {
    match spec {
        ModelSpec::BrownResnick { variogram, .. } => {
            if sites.len() == 1 {
                return Ok(ThetaValue::closed(F::one()));
            }
            theta_set_br_mc(variogram, sites, n_draws, rng)
        }
        ModelSpec::MovingMaximum { kernel } => theta_set_mm(kernel, sites),
    }
}

/// `C(S) = E[max_{s∈S} η(s)^{-1}]`, by Monte Carlo over simulated fields;
/// singletons are `1` exactly (the mean of an inverse unit Fréchet, i.e. a
/// unit exponential) and skip simulation.
pub fn capital_c<F: SampleScalar>(
    spec: &ModelSpec<F>,
    sites: &[Site],
    n_draws: usize,
    rng: &mut StreamRng,
) -> Result<Estimated<F>> {
    let window = Arc::new(LatticeWindow::from_sites(sites.to_vec())?);
    if window.len() == 1 {
        return Ok(Estimated {
            value: F::one(),
            std_error: 0.0,
        });
    }
    if n_draws < 2 {
        return Err(MaxStableError::invalid(
            "n_draws",
            n_draws as f64,
            "need at least two draws for a standard error",
        ));
    }
    let simulator = FieldSimulator::new(spec, &window, &TruncationPolicy::default(), rng)?;
    let mut maxima = Vec::with_capacity(n_draws);
    for _ in 0..n_draws {
        let field = simulator.draw(rng)?;
        let m = field
            .values()
            .iter()
            .map(|&v| v.recip())
            .fold(F::neg_infinity(), F::max);
        maxima.push(m);
    }
    let value = mean(&maxima);
    let std_error = (sample_variance(&maxima) / F::of(n_draws as f64))
        .sqrt()
        .to_f64_lossy();
    Ok(Estimated { value, std_error })
}

/// Dependence function `τ_a(h) = (2 - θ(h)) / a` of the max-stable field:
/// `log P[η(0) ≤ a, η(h) ≤ a] - 2 log P[η(0) ≤ a]` under unit Fréchet
/// marginals.
pub fn tau_a<F: Scalar>(spec: &ModelSpec<F>, h: &Site, a: F) -> Result<F> {
    if !(a > F::zero()) {
        return Err(MaxStableError::invalid(
            "a",
            a.to_f64_lossy(),
            "dependence-function level must be positive",
        ));
    }
    let theta = theta_pair(spec, h)?;
    Ok((F::of(2.0) - theta.value) / a)
}

/// Empirical counterpart of [`tau_a`] from simulated replicates:
/// `log p̂_joint - 2 log p̂_marginal` with a conservative delta-method
/// standard error (the positive covariance between the two fractions is
/// dropped).
pub fn tau_a_empirical<F: SampleScalar>(
    spec: &ModelSpec<F>,
    h: &Site,
    a: F,
    replicates: usize,
    rng: &mut StreamRng,
) -> Result<Estimated<F>> {
    if !(a > F::zero()) {
        return Err(MaxStableError::invalid(
            "a",
            a.to_f64_lossy(),
            "dependence-function level must be positive",
        ));
    }
    if replicates < 2 {
        return Err(MaxStableError::invalid(
            "replicates",
            replicates as f64,
            "need at least two replicates",
        ));
    }
    let origin = Site::origin(h.dim());
    let window = Arc::new(LatticeWindow::from_sites(vec![origin.clone(), h.clone()])?);
    let simulator = FieldSimulator::new(spec, &window, &TruncationPolicy::default(), rng)?;
    let mut joint = 0usize;
    let mut marginal = 0usize;
    for _ in 0..replicates {
        let field = simulator.draw(rng)?;
        let at_origin = field.value_at(&origin).expect("origin in window");
        let at_h = field.value_at(h).expect("lag site in window");
        if at_origin <= a {
            marginal += 1;
            if at_h <= a {
                joint += 1;
            }
        }
    }
    if joint == 0 || marginal == 0 {
        return Err(MaxStableError::DegenerateStatistic {
            context: "tau_a_empirical",
            message: format!(
                "no replicate fell below a = {a}; raise the level or the \
                 replicate count"
            ),
        });
    }
    let n = replicates as f64;
    let p_joint = joint as f64 / n;
    let p_marginal = marginal as f64 / n;
    let value = F::of(p_joint.ln() - 2.0 * p_marginal.ln());
    // Var[log p̂] ≈ (1 - p) / (n p) for a binomial fraction.
    let var_log_joint = (1.0 - p_joint) / (n * p_joint);
    let var_log_marginal = (1.0 - p_marginal) / (n * p_marginal);
    let std_error = (var_log_joint + 4.0 * var_log_marginal).sqrt();
    Ok(Estimated { value, std_error })
}
