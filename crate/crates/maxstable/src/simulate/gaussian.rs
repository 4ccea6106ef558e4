//! Sampling the driving Gaussian process with stationary increments.
//!
//! The process is pinned to `W(0) = 0`, which fixes its covariance to
//! `Cov(W(s), W(t)) = (V(s) + V(t) - V(s - t)) / 2` and variance
//! `σ²(t) = V(t)`. Sampling is by Cholesky factorization of the covariance
//! of the non-origin sites; the origin (when present) is set to zero
//! structurally rather than numerically.

use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{MaxStableError, Result};
use crate::lattice::{LatticeWindow, Site};
use crate::model::VariogramSpec;
use crate::rng::StreamRng;
use crate::scalar::{SampleScalar, Scalar};

/// Relative diagonal jitter applied before factorization; exponents near 2
/// make the covariance numerically singular.
const RELATIVE_JITTER: f64 = 1e-10;

/// Cholesky factorization of a symmetric matrix stored as packed lower rows
/// (`a[i(i+1)/2 + j]`, `j <= i`), in place.
pub(crate) fn cholesky_in_place<F: Scalar>(a: &mut [F], n: usize, jitter: f64) -> Result<()> {
    debug_assert_eq!(a.len(), n * (n + 1) / 2);
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * (i + 1) / 2 + j];
            if i == j {
                s += F::of(jitter);
            }
            for k in 0..j {
                s -= a[i * (i + 1) / 2 + k] * a[j * (j + 1) / 2 + k];
            }
            if i == j {
                if !(s > F::zero()) {
                    return Err(MaxStableError::NotPositiveSemiDefinite {
                        pivot: i,
                        pivot_value: s.to_f64_lossy(),
                        jitter,
                    });
                }
                a[i * (i + 1) / 2 + j] = s.sqrt();
            } else {
                a[i * (i + 1) / 2 + j] = s / a[j * (j + 1) / 2 + j];
            }
        }
    }
    Ok(())
}

/// Reusable sampler of `(W(t))_{t ∈ window}` pinned at the origin.
///
/// Construction factors the covariance once; each [`sample_into`] costs one
/// standard-normal vector and a triangular matrix–vector product.
///
/// [`sample_into`]: GaussianIncrementsSampler::sample_into
#[derive(Debug, Clone)]
pub struct GaussianIncrementsSampler<F> {
    window: Arc<LatticeWindow>,
    /// Window indices of the non-origin sites, in window order.
    reduced: Vec<usize>,
    origin_index: Option<usize>,
    /// Packed lower-triangular Cholesky factor over the reduced sites.
    chol: Vec<F>,
    /// `σ²(t) = V(t)` aligned with the window sites.
    sigma_sq: Vec<F>,
    jitter: f64,
}

impl<F: Scalar> GaussianIncrementsSampler<F> {
    /// Factors the pinned covariance of `window` under `variogram`.
    pub fn new(variogram: &VariogramSpec<F>, window: Arc<LatticeWindow>) -> Result<Self> {
        let origin = Site::origin(window.dim());
        let origin_index = window.index_of(&origin);
        let reduced: Vec<usize> = (0..window.len())
            .filter(|&i| Some(i) != origin_index)
            .collect();
        let n = reduced.len();
        let mut cov = vec![F::zero(); n * (n + 1) / 2];
        let mut trace = F::zero();
        for (i, &wi) in reduced.iter().enumerate() {
            let si = &window.sites()[wi];
            for (j, &wj) in reduced.iter().enumerate().take(i + 1) {
                let sj = &window.sites()[wj];
                let c = variogram.pinned_covariance(si, sj);
                cov[i * (i + 1) / 2 + j] = c;
                if i == j {
                    trace += c;
                }
            }
        }
        let jitter = if n > 0 {
            RELATIVE_JITTER * trace.to_f64_lossy() / n as f64
        } else {
            0.0
        };
        cholesky_in_place(&mut cov, n, jitter)?;
        let sigma_sq = window
            .sites()
            .iter()
            .map(|s| variogram.pinned_variance(s))
            .collect();
        Ok(GaussianIncrementsSampler {
            window,
            reduced,
            origin_index,
            chol: cov,
            sigma_sq,
            jitter,
        })
    }

    /// The window this sampler draws on.
    pub fn window(&self) -> &Arc<LatticeWindow> {
        &self.window
    }

    /// `σ²(t) = V(t)` aligned with the window sites.
    pub fn sigma_sq(&self) -> &[F] {
        &self.sigma_sq
    }

    /// Diagonal jitter that was applied before factorization.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Draws one field into `out` (length `window.len()`), origin pinned to 0.
    pub fn sample_into(&self, rng: &mut StreamRng, out: &mut [F])
    where
        F: SampleScalar,
    {
        debug_assert_eq!(out.len(), self.window.len());
        let n = self.reduced.len();
        let mut xi = Vec::with_capacity(n);
        for _ in 0..n {
            xi.push(F::sample_standard_normal(rng));
        }
        if let Some(o) = self.origin_index {
            out[o] = F::zero();
        }
        for (i, &wi) in self.reduced.iter().enumerate() {
            let mut acc = F::zero();
            let row = &self.chol[i * (i + 1) / 2..i * (i + 1) / 2 + i + 1];
            for (lij, &x) in row.iter().zip(&xi) {
                acc += *lij * x;
            }
            out[wi] = acc;
        }
    }

    /// Draws one field as a fresh vector.
    pub fn sample(&self, rng: &mut StreamRng) -> Vec<F>
    where
        F: SampleScalar,
    {
        let mut out = vec![F::zero(); self.window.len()];
        self.sample_into(rng, &mut out);
        out
    }
}

/// One draw of `(W(t))_{t ∈ sites}` with `W(0) = 0`, as a site-keyed map.
///
/// The origin is adjoined to the site set if absent, so the returned map
/// always contains it.
pub fn gaussian_increments_sample<F: SampleScalar>(
    variogram: &VariogramSpec<F>,
    sites: &[Site],
    rng: &mut StreamRng,
) -> Result<HashMap<Site, F>> {
    if sites.is_empty() {
        return Err(MaxStableError::EmptySiteSet {
            context: "gaussian_increments_sample needs at least one site",
        });
    }
    let mut all = sites.to_vec();
    all.push(Site::origin(sites[0].dim()));
    let window = Arc::new(LatticeWindow::from_sites(all)?);
    let sampler = GaussianIncrementsSampler::new(variogram, window.clone())?;
    let values = sampler.sample(rng);
    Ok(window
        .sites()
        .iter()
        .cloned()
        .zip(values)
        .collect())
}
