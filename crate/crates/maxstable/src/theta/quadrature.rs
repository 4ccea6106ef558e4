//! Tensor midpoint quadrature with Richardson stopping.
//!
//! The set-coefficient integrands are continuous but only piecewise smooth
//! (pointwise maxima of kernels), which favors a robust low-order rule over
//! high-order schemes: the composite midpoint rule keeps its `O(n^{-2})`
//! convergence for such integrands, so the error of the finer of two nested
//! levels is estimated as a third of their difference.

use crate::scalar::Scalar;

/// Result of one adaptive integration.
#[derive(Debug, Clone, Copy)]
#[cfg_attr(not(test), allow(dead_code))] // `converged`/`evals` are asserted on in tests
pub(crate) struct QuadratureOutcome<F> {
    /// Best composite-midpoint value.
    pub value: F,
    /// Richardson error estimate for `value` (inflated when not converged).
    pub error: f64,
    /// Whether the relative tolerance was met within the evaluation budget.
    pub converged: bool,
    /// Total integrand evaluations spent.
    pub evals: usize,
}

/// Composite midpoint value of `g` over the box `[lo, hi]` with `n` cells
/// per axis.
fn midpoint_level<F: Scalar>(lo: &[F], hi: &[F], n: usize, g: &impl Fn(&[F]) -> F) -> F {
    let dim = lo.len();
    let steps: Vec<F> = (0..dim)
        .map(|k| (hi[k] - lo[k]) / F::of(n as f64))
        .collect();
    let cell_volume: F = steps.iter().copied().product();
    let half = F::of(0.5);
    let mut x = vec![F::zero(); dim];
    let mut idx = vec![0usize; dim];
    for k in 0..dim {
        x[k] = lo[k] + half * steps[k];
    }
    let mut sum = F::zero();
    'cells: loop {
        sum += g(&x);
        for k in (0..dim).rev() {
            idx[k] += 1;
            if idx[k] < n {
                x[k] = lo[k] + (F::of(idx[k] as f64) + half) * steps[k];
                continue 'cells;
            }
            idx[k] = 0;
            x[k] = lo[k] + half * steps[k];
        }
        break;
    }
    sum * cell_volume
}

/// Integrates `g` over the axis-aligned box `[lo, hi]` by nested midpoint
/// refinement (cells per axis doubling each level), stopping when two
/// consecutive levels agree to `rel_tol` or when the next level would exceed
/// `max_evals` integrand evaluations.
pub(crate) fn midpoint_integrate<F: Scalar>(
    lo: &[F],
    hi: &[F],
    rel_tol: f64,
    max_evals: usize,
    g: impl Fn(&[F]) -> F,
) -> QuadratureOutcome<F> {
    debug_assert_eq!(lo.len(), hi.len());
    debug_assert!(!lo.is_empty());
    let dim = lo.len();
    let mut n = 1usize;
    let mut evals = 0usize;
    let mut previous = midpoint_level(lo, hi, n, &g);
    evals += 1;
    let mut diff = f64::INFINITY;
    loop {
        n *= 2;
        let cost = n.pow(dim as u32);
        if evals + cost > max_evals {
            // Budget exhausted: report the best value with the last observed
            // level difference as a (non-certified) error estimate.
            return QuadratureOutcome {
                value: previous,
                error: if diff.is_finite() {
                    diff
                } else {
                    previous.to_f64_lossy().abs()
                },
                converged: false,
                evals,
            };
        }
        let current = midpoint_level(lo, hi, n, &g);
        evals += cost;
        diff = (current - previous).to_f64_lossy().abs();
        let scale = current.to_f64_lossy().abs().max(f64::MIN_POSITIVE);
        if diff <= rel_tol * scale {
            return QuadratureOutcome {
                value: current,
                error: diff / 3.0,
                converged: true,
                evals,
            };
        }
        previous = current;
    }
}
