//! Variograms of intrinsically stationary Gaussian processes with `W(0) = 0`.

use serde::{Deserialize, Serialize};

use crate::error::{MaxStableError, Result};
use crate::lattice::Site;
use crate::scalar::Scalar;

/// Parametric family tag for [`VariogramSpec`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VariogramFamily {
    /// `V(h) = (|h| / scale)^exponent` with `exponent ∈ (0, 2]`.
    PowerLaw,
    /// Fractional Brownian motion: `V(h) = (|h| / scale)^(2 hurst)`.
    FractionalBrownian,
}

/// Variogram `V(h) = E[(W(t + h) - W(t))^2]` of the driving Gaussian process.
///
/// Both families reduce to a power law in the Euclidean norm of the lag; the
/// fractional tag stores the Hurst index instead of the raw exponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariogramSpec<F> {
    family: VariogramFamily,
    /// Range parameter `ρ > 0`.
    scale: F,
    /// Power-law exponent `α ∈ (0, 2]` (equals `2 hurst` for the fractional family).
    exponent: F,
}

impl<F: Scalar> VariogramSpec<F> {
    /// Power-law variogram `V(h) = (|h| / scale)^exponent`.
    pub fn power_law(scale: F, exponent: F) -> Result<Self> {
        Self::validate_scale(scale)?;
        if !(exponent > F::zero() && exponent <= F::of(2.0)) {
            return Err(MaxStableError::invalid(
                "exponent",
                exponent.to_f64_lossy(),
                "variogram exponent must lie in (0, 2]",
            ));
        }
        Ok(VariogramSpec {
            family: VariogramFamily::PowerLaw,
            scale,
            exponent,
        })
    }

    /// Fractional Brownian variogram with Hurst index `hurst ∈ (0, 1]`.
    pub fn fractional_brownian(scale: F, hurst: F) -> Result<Self> {
        Self::validate_scale(scale)?;
        if !(hurst > F::zero() && hurst <= F::one()) {
            return Err(MaxStableError::invalid(
                "hurst",
                hurst.to_f64_lossy(),
                "Hurst index must lie in (0, 1]",
            ));
        }
        Ok(VariogramSpec {
            family: VariogramFamily::FractionalBrownian,
            scale,
            exponent: F::of(2.0) * hurst,
        })
    }

    fn validate_scale(scale: F) -> Result<()> {
        if !(scale > F::zero() && scale.is_finite()) {
            return Err(MaxStableError::invalid(
                "scale",
                scale.to_f64_lossy(),
                "variogram scale must be positive and finite",
            ));
        }
        Ok(())
    }

    /// Family tag.
    pub fn family(&self) -> VariogramFamily {
        self.family
    }

    /// Range parameter `ρ`.
    pub fn scale(&self) -> F {
        self.scale
    }

    /// Effective power-law exponent `α`.
    pub fn exponent(&self) -> F {
        self.exponent
    }

    /// `V(h)` for a lattice lag.
    pub fn value(&self, h: &Site) -> F {
        self.value_of_norm(F::of(h.l2_norm()))
    }

    /// `V(h)` for a lag of Euclidean norm `r >= 0`.
    pub fn value_of_norm(&self, r: F) -> F {
        if r == F::zero() {
            return F::zero();
        }
        (r / self.scale).powf(self.exponent)
    }

    /// Variance `σ²(t) = V(t)` of the process pinned at the origin.
    pub fn pinned_variance(&self, t: &Site) -> F {
        self.value(t)
    }

    /// Covariance of the pinned process,
    /// `Cov(W(s), W(t)) = (V(s) + V(t) - V(s - t)) / 2`.
    pub fn pinned_covariance(&self, s: &Site, t: &Site) -> F {
        (self.value(s) + self.value(t) - self.value(&s.sub(t))) / F::of(2.0)
    }
}
