//! Extremal coefficients of finite site sets,
//! `θ(S) = ∫ sup_{s∈S} f(s) σ(df)`.
//!
//! For moving maxima the spectral measure is the translation of the kernel
//! by a Lebesgue-distributed center, giving the integral
//! `θ(S) = ∫ max_{s∈S} f(s - x) dx`; for Brown–Resnick it is the law of
//! `exp(W(t) - σ²(t)/2)`, evaluated by Monte Carlo.

use crate::error::{MaxStableError, Result};
use crate::lattice::{LatticeWindow, Site};
use crate::model::{KernelFamily, KernelSpec, VariogramSpec};
use crate::rng::StreamRng;
use crate::scalar::{SampleScalar, Scalar};
use crate::stats::{mean, sample_variance};
use crate::theta::quadrature::midpoint_integrate;
use crate::theta::{ThetaMethod, ThetaValue};

/// Evaluation budget for the set-coefficient quadrature.
const QUADRATURE_MAX_EVALS: usize = 1 << 22;
/// Richardson stopping tolerance (relative).
const QUADRATURE_REL_TOL: f64 = 1e-6;

/// Exact union volume of congruent boxes `[s - R, s + R]^d`, for the
/// indicator kernel.
///
/// Quadrature converges too slowly on a discontinuous integrand, so the
/// union is decomposed into the grid cells cut by all box faces; each cell
/// is entirely inside or outside the union, decided at its center.
fn indicator_union_theta<F: Scalar>(kernel: &KernelSpec<F>, sites: &[Site]) -> F {
    let dim = kernel.dim();
    let radius = kernel.radius();
    let mut cuts: Vec<Vec<F>> = vec![Vec::new(); dim];
    for site in sites {
        for (k, &c) in site.coords().iter().enumerate() {
            let center = F::of(c as f64);
            cuts[k].push(center - radius);
            cuts[k].push(center + radius);
        }
    }
    for axis in &mut cuts {
        axis.sort_by(|a, b| a.partial_cmp(b).expect("finite cuts"));
        axis.dedup();
    }
    let half = F::of(0.5);
    let mut idx = vec![0usize; dim];
    let mut volume = F::zero();
    'cells: loop {
        let mut cell = F::one();
        let mut center = Vec::with_capacity(dim);
        for k in 0..dim {
            let a = cuts[k][idx[k]];
            let b = cuts[k][idx[k] + 1];
            cell *= b - a;
            center.push(half * (a + b));
        }
        let covered = sites.iter().any(|s| {
            s.coords()
                .iter()
                .zip(&center)
                .all(|(&c, &x)| (F::of(c as f64) - x).abs() <= radius)
        });
        if covered {
            volume += cell;
        }
        for k in (0..dim).rev() {
            idx[k] += 1;
            if idx[k] + 1 < cuts[k].len() {
                continue 'cells;
            }
            idx[k] = 0;
        }
        break;
    }
    volume * kernel.peak()
}

/// `θ(S)` for a moving-maximum kernel over a finite nonempty site set.
///
/// Indicator kernels use an exact cell decomposition of the support union;
/// smooth kernels use adaptive midpoint quadrature over the hull of `S`
/// inflated by the kernel radius. Quadrature that fails to converge within
/// its budget still returns its best value, with the error estimate set to
/// the last refinement difference.
pub fn theta_set_mm<F: Scalar>(kernel: &KernelSpec<F>, sites: &[Site]) -> Result<ThetaValue<F>> {
    let window = LatticeWindow::from_sites(sites.to_vec())?;
    if window.dim() != kernel.dim() {
        return Err(MaxStableError::DimensionMismatch {
            context: "theta_set_mm",
            expected: kernel.dim(),
            actual: window.dim(),
        });
    }
    let sites = window.sites();
    if sites.len() == 1 {
        // A spectral density integrates to one.
        return Ok(ThetaValue::closed(F::one()));
    }
    if kernel.family() == KernelFamily::IndicatorBox {
        let value = indicator_union_theta(kernel, sites);
        return Ok(ThetaValue {
            value,
            method: ThetaMethod::ClosedForm,
            error: value.to_f64_lossy() * 1e-12,
        });
    }

    let dim = window.dim();
    let radius = kernel.radius();
    let (lo, hi) = window.bounding_box();
    let box_lo: Vec<F> = (0..dim).map(|k| F::of(lo[k] as f64) - radius).collect();
    let box_hi: Vec<F> = (0..dim).map(|k| F::of(hi[k] as f64) + radius).collect();
    let coords: Vec<Vec<F>> = sites
        .iter()
        .map(|s| s.coords().iter().map(|&c| F::of(c as f64)).collect())
        .collect();
    let outcome = midpoint_integrate(
        &box_lo,
        &box_hi,
        QUADRATURE_REL_TOL,
        QUADRATURE_MAX_EVALS,
        |x: &[F]| {
            let mut best = F::zero();
            for s in &coords {
                let mut f = F::one();
                for k in 0..dim {
                    f *= kernel.eval_axis(s[k] - x[k]);
                    if f == F::zero() {
                        break;
                    }
                }
                if f > best {
                    best = f;
                }
            }
            best
        },
    );
    Ok(ThetaValue {
        value: outcome.value,
        method: ThetaMethod::Quadrature,
        error: outcome.error,
    })
}

/// `θ(S)` for Brown–Resnick by Monte Carlo over the spectral measure:
/// the mean of `max_{s∈S} exp(W(s) - σ²(s)/2)` over `n_draws` Gaussian
/// samples, with the standard error of the mean as the error estimate.
pub fn theta_set_br_mc<F: SampleScalar>(
    variogram: &VariogramSpec<F>,
    sites: &[Site],
    n_draws: usize,
    rng: &mut StreamRng,
) -> Result<ThetaValue<F>> {
    if n_draws < 1000 {
        return Err(MaxStableError::invalid(
            "n_draws",
            n_draws as f64,
            "spectral Monte Carlo needs at least 1000 draws",
        ));
    }
    let window = std::sync::Arc::new(LatticeWindow::from_sites(sites.to_vec())?);
    let sampler = crate::simulate::GaussianIncrementsSampler::new(variogram, window.clone())?;
    let half = F::of(0.5);
    let drift: Vec<F> = sampler.sigma_sq().iter().map(|&v| half * v).collect();
    let mut w = vec![F::zero(); window.len()];
    let mut maxima = Vec::with_capacity(n_draws);
    for _ in 0..n_draws {
        sampler.sample_into(rng, &mut w);
        let mut m = F::neg_infinity();
        for (wi, di) in w.iter().zip(&drift) {
            let f = (*wi - *di).exp();
            if f > m {
                m = f;
            }
        }
        maxima.push(m);
    }
    let value = mean(&maxima);
    let se = (sample_variance(&maxima) / F::of(n_draws as f64))
        .sqrt()
        .to_f64_lossy();
    Ok(ThetaValue {
        value,
        method: ThetaMethod::MonteCarlo,
        error: se,
    })
}
