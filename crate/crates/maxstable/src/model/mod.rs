//! Model specifications for the two simulable max-stable families.

pub mod kernel;
pub mod variogram;

use serde::{Deserialize, Serialize};

use crate::error::{MaxStableError, Result};
use crate::scalar::Scalar;

pub use kernel::{KernelFamily, KernelSpec};
pub use variogram::{VariogramFamily, VariogramSpec};

/// A stationary simple max-stable model on `Z^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum ModelSpec<F> {
    /// Brown–Resnick field driven by a Gaussian process with the given
    /// variogram, pinned to `W(0) = 0`.
    BrownResnick {
        dim: usize,
        variogram: VariogramSpec<F>,
    },
    /// Moving-maximum field with the given spectral kernel.
    MovingMaximum { kernel: KernelSpec<F> },
}

impl<F: Scalar> ModelSpec<F> {
    /// Brown–Resnick model in dimension `dim`.
    pub fn brown_resnick(dim: usize, variogram: VariogramSpec<F>) -> Result<Self> {
        if dim == 0 {
            return Err(MaxStableError::invalid(
                "dim",
                0.0,
                "model dimension must be at least 1",
            ));
        }
        Ok(ModelSpec::BrownResnick { dim, variogram })
    }

    /// Moving-maximum model; the dimension comes from the kernel.
    pub fn moving_maximum(kernel: KernelSpec<F>) -> Self {
        ModelSpec::MovingMaximum { kernel }
    }

    /// Lattice dimension `d`.
    pub fn dim(&self) -> usize {
        match self {
            ModelSpec::BrownResnick { dim, .. } => *dim,
            ModelSpec::MovingMaximum { kernel } => kernel.dim(),
        }
    }

    /// The variogram, for Brown–Resnick models.
    pub fn variogram(&self) -> Option<&VariogramSpec<F>> {
        match self {
            ModelSpec::BrownResnick { variogram, .. } => Some(variogram),
            ModelSpec::MovingMaximum { .. } => None,
        }
    }

    /// The kernel, for moving-maximum models.
    pub fn kernel(&self) -> Option<&KernelSpec<F>> {
        match self {
            ModelSpec::BrownResnick { .. } => None,
            ModelSpec::MovingMaximum { kernel } => Some(kernel),
        }
    }

    /// Short human-readable tag for report files.
    pub fn descriptor(&self) -> String {
        match self {
            ModelSpec::BrownResnick { dim, variogram } => format!(
                "brown-resnick(d={dim},family={:?},scale={},exponent={})",
                variogram.family(),
                variogram.scale(),
                variogram.exponent()
            ),
            ModelSpec::MovingMaximum { kernel } => format!(
                "moving-maximum(d={},family={:?},bandwidth={},radius={})",
                kernel.dim(),
                kernel.family(),
                kernel.bandwidth(),
                kernel.radius()
            ),
        }
    }
}
