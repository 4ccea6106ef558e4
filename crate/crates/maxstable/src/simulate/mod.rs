//! Simulation of max-stable fields from their Poisson point process
//! representations.
//!
//! Both model families are simulated by enumerating Poisson atoms in
//! decreasing weight order (`z_i = 1/Γ_i`, partial sums of unit
//! exponentials) and taking pointwise maxima of their contributions. The
//! series is infinite; truncation is governed by [`TruncationPolicy`]:
//! exact stopping for compactly supported kernels, a pilot-calibrated
//! probabilistic certificate for Brown–Resnick.

pub mod brown_resnick;
pub mod frechet;
pub mod gaussian;
pub mod max_stability;
pub mod moving_maximum;

use std::io;
use std::sync::Arc;

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::error::{MaxStableError, Result};
use crate::lattice::{LatticeWindow, Site};
use crate::model::KernelSpec;
use crate::scalar::Scalar;

pub use brown_resnick::{simulate_brown_resnick, BrownResnickSampler};
pub use frechet::FrechetPoints;
pub use gaussian::{gaussian_increments_sample, GaussianIncrementsSampler};
pub use max_stability::{max_stability_check, MaxStabilityReport};
pub use moving_maximum::simulate_moving_maximum;

/// Controls how the infinite atom series is truncated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationPolicy<F> {
    /// Hard cap on generated atoms; hitting it sets the truncation flag.
    pub max_atoms: usize,
    /// Bias tolerance `ε` of the Brown–Resnick certificate: stop once
    /// `z · q̂ < ε · min_t η(t)`.
    pub bias_epsilon: F,
    /// Number of pilot Gaussian draws used to estimate `q̂`.
    pub pilot_draws: usize,
    /// Quantile level of `max_t exp(W(t) - σ²(t)/2)` defining `q̂`.
    pub pilot_quantile: F,
    /// Retention depth for moving maxima: stop once
    /// `z · f_max < depth_factor · min_t η(t)`. The default `1` is the exact
    /// rule for compact kernels; values below `1` retain additional atoms
    /// that cannot affect the field, for point-process experiments.
    pub depth_factor: F,
}

impl<F: Scalar> Default for TruncationPolicy<F> {
    fn default() -> Self {
        TruncationPolicy {
            max_atoms: 100_000,
            bias_epsilon: F::of(1e-3),
            pilot_draws: 2000,
            pilot_quantile: F::of(0.9999),
            depth_factor: F::one(),
        }
    }
}

impl<F: Scalar> TruncationPolicy<F> {
    /// Validates the policy fields.
    pub fn validate(&self) -> Result<()> {
        if self.max_atoms == 0 {
            return Err(MaxStableError::invalid(
                "max_atoms",
                0.0,
                "atom budget must be at least 1",
            ));
        }
        if !(self.bias_epsilon > F::zero()) {
            return Err(MaxStableError::invalid(
                "bias_epsilon",
                self.bias_epsilon.to_f64_lossy(),
                "bias tolerance must be positive",
            ));
        }
        if self.pilot_draws < 2 {
            return Err(MaxStableError::invalid(
                "pilot_draws",
                self.pilot_draws as f64,
                "pilot needs at least two draws",
            ));
        }
        if !(self.pilot_quantile > F::zero() && self.pilot_quantile < F::one()) {
            return Err(MaxStableError::invalid(
                "pilot_quantile",
                self.pilot_quantile.to_f64_lossy(),
                "quantile level must lie strictly between 0 and 1",
            ));
        }
        if !(self.depth_factor > F::zero() && self.depth_factor <= F::one()) {
            return Err(MaxStableError::invalid(
                "depth_factor",
                self.depth_factor.to_f64_lossy(),
                "retention depth must lie in (0, 1]",
            ));
        }
        Ok(())
    }
}

/// One realized field on a window, with truncation provenance.
#[derive(Debug, Clone)]
pub struct FieldSample<F> {
    window: Arc<LatticeWindow>,
    values: Vec<F>,
    seed: u64,
    atoms_used: usize,
    truncation_flagged: bool,
    bias_diagnostic: f64,
}

impl<F: Scalar> FieldSample<F> {
    pub(crate) fn new(
        window: Arc<LatticeWindow>,
        values: Vec<F>,
        seed: u64,
        atoms_used: usize,
        truncation_flagged: bool,
        bias_diagnostic: f64,
    ) -> Self {
        debug_assert_eq!(window.len(), values.len());
        FieldSample {
            window,
            values,
            seed,
            atoms_used,
            truncation_flagged,
            bias_diagnostic,
        }
    }

    /// The observation window.
    pub fn window(&self) -> &Arc<LatticeWindow> {
        &self.window
    }

    /// Field values aligned with `window().sites()`.
    pub fn values(&self) -> &[F] {
        &self.values
    }

    /// Value at a site, if the site belongs to the window.
    pub fn value_at(&self, site: &Site) -> Option<F> {
        self.window.index_of(site).map(|i| self.values[i])
    }

    /// Smallest field value on the window.
    pub fn min_value(&self) -> F {
        self.values
            .iter()
            .copied()
            .fold(F::infinity(), |a, b| a.min(b))
    }

    /// RNG stream id that produced this sample.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of Poisson atoms materialized.
    pub fn atoms_used(&self) -> usize {
        self.atoms_used
    }

    /// Whether the atom budget ran out before the stopping rule fired.
    pub fn truncation_flagged(&self) -> bool {
        self.truncation_flagged
    }

    /// Residual-bias diagnostic: the ratio of the last atom's best possible
    /// contribution to the current field minimum (small is good).
    pub fn bias_diagnostic(&self) -> f64 {
        self.bias_diagnostic
    }

    /// Writes the sample as CSV with one row per site:
    /// `x0,…,x{d-1},value`.
    pub fn write_csv<W: io::Write>(&self, out: &mut W) -> io::Result<()> {
        for k in 0..self.window.dim() {
            write!(out, "x{k},")?;
        }
        writeln!(out, "value")?;
        for (site, value) in self.window.sites().iter().zip(&self.values) {
            for c in site.coords() {
                write!(out, "{c},")?;
            }
            writeln!(out, "{value}")?;
        }
        Ok(())
    }
}

impl<F: Scalar + Serialize> Serialize for FieldSample<F> {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("FieldSample", 8)?;
        s.serialize_field("dim", &self.window.dim())?;
        s.serialize_field("window", self.window.descriptor())?;
        s.serialize_field("sites", &self.window.sites())?;
        s.serialize_field("values", &self.values)?;
        s.serialize_field("seed", &self.seed)?;
        s.serialize_field("atoms_used", &self.atoms_used)?;
        s.serialize_field("truncation_flagged", &self.truncation_flagged)?;
        s.serialize_field("bias_diagnostic", &self.bias_diagnostic)?;
        s.end()
    }
}

/// Spectral datum of one Poisson atom.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum SpectralDatum<F> {
    /// Spectral function values `exp(W(t) - σ²(t)/2)` aligned with the
    /// window sites (Brown–Resnick atoms).
    Profile(Vec<F>),
    /// Kernel center `u ∈ R^d` (moving-maximum atoms).
    Location(Vec<F>),
}

/// One Poisson atom `z · f`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Atom<F> {
    /// Weight `z_i = 1/Γ_i` (scaled by the location-box volume for moving
    /// maxima).
    pub weight: F,
    /// The spectral datum determining the contribution shape.
    pub datum: SpectralDatum<F>,
}

/// Why atom generation stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    /// The adaptive rule certified that further atoms are negligible.
    AdaptiveRule,
    /// The hard atom budget ran out first.
    AtomBudget,
}

/// Stopping diagnostics of a [`PointProcessSample`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StopInfo {
    pub reason: StopReason,
    /// Weight of the first atom *not* materialized.
    pub next_weight: f64,
    /// Stopping threshold the rule compared against.
    pub threshold: f64,
}

/// The retained atoms behind one [`FieldSample`].
#[derive(Debug, Clone)]
pub struct PointProcessSample<F> {
    window: Arc<LatticeWindow>,
    atoms: Vec<Atom<F>>,
    kernel: Option<KernelSpec<F>>,
    stop: StopInfo,
}

/// Contribution of a moving-maximum atom centered at `u` to `site`.
///
/// Shared by the simulator and by field reconstruction so both produce
/// bit-identical values.
pub(crate) fn location_contribution<F: Scalar>(
    kernel: &KernelSpec<F>,
    weight: F,
    u: &[F],
    site: &Site,
) -> F {
    let dx: Vec<F> = site
        .coords()
        .iter()
        .zip(u)
        .map(|(&c, &uk)| F::of(c as f64) - uk)
        .collect();
    weight * kernel.eval(&dx)
}

impl<F: Scalar> PointProcessSample<F> {
    pub(crate) fn new(
        window: Arc<LatticeWindow>,
        atoms: Vec<Atom<F>>,
        kernel: Option<KernelSpec<F>>,
        stop: StopInfo,
    ) -> Self {
        PointProcessSample {
            window,
            atoms,
            kernel,
            stop,
        }
    }

    /// The observation window the atoms were generated for.
    pub fn window(&self) -> &Arc<LatticeWindow> {
        &self.window
    }

    /// Retained atoms in decreasing weight order.
    pub fn atoms(&self) -> &[Atom<F>] {
        &self.atoms
    }

    /// The kernel, for samples with location atoms.
    pub fn kernel(&self) -> Option<&KernelSpec<F>> {
        self.kernel.as_ref()
    }

    /// Stopping diagnostics.
    pub fn stop(&self) -> StopInfo {
        self.stop
    }

    /// Contribution of `atom` at the site with window index `site_idx`.
    pub fn contribution(&self, atom: &Atom<F>, site_idx: usize) -> F {
        match &atom.datum {
            SpectralDatum::Profile(profile) => atom.weight * profile[site_idx],
            SpectralDatum::Location(u) => {
                let kernel = self
                    .kernel
                    .as_ref()
                    .expect("location atoms require a kernel");
                location_contribution(kernel, atom.weight, u, &self.window.sites()[site_idx])
            }
        }
    }

    /// Reconstructs the field as the pointwise maximum over retained atoms.
    pub fn field_values(&self) -> Vec<F> {
        let n = self.window.len();
        let mut values = vec![F::zero(); n];
        for atom in &self.atoms {
            for (i, v) in values.iter_mut().enumerate() {
                let c = self.contribution(atom, i);
                if c > *v {
                    *v = c;
                }
            }
        }
        values
    }

    /// Whether the weight sequence is strictly decreasing (a type invariant).
    pub fn weights_strictly_decreasing(&self) -> bool {
        self.atoms
            .windows(2)
            .all(|pair| pair[0].weight > pair[1].weight)
    }
}

/// Model-agnostic replicate source: one constructed instance draws
/// independent fields of either family from explicit streams.
///
/// Construction does the per-(model, window) setup once — covariance
/// factorization and pilot calibration for Brown–Resnick — so replicate
/// loops only pay the per-draw cost.
#[derive(Debug, Clone)]
pub enum FieldSimulator<F> {
    BrownResnick(BrownResnickSampler<F>),
    MovingMaximum {
        spec: crate::model::ModelSpec<F>,
        window: Arc<LatticeWindow>,
        policy: TruncationPolicy<F>,
    },
}

impl<F: crate::scalar::SampleScalar> FieldSimulator<F> {
    /// Prepares a simulator for `spec` on `window`; `pilot_rng` is consumed
    /// only by the Brown–Resnick pilot calibration.
    pub fn new(
        spec: &crate::model::ModelSpec<F>,
        window: &Arc<LatticeWindow>,
        policy: &TruncationPolicy<F>,
        pilot_rng: &mut crate::rng::StreamRng,
    ) -> crate::error::Result<Self> {
        if spec.dim() != window.dim() {
            return Err(MaxStableError::DimensionMismatch {
                context: "FieldSimulator::new",
                expected: spec.dim(),
                actual: window.dim(),
            });
        }
        policy.validate()?;
        match spec {
            crate::model::ModelSpec::BrownResnick { variogram, .. } => {
                Ok(FieldSimulator::BrownResnick(BrownResnickSampler::new(
                    variogram,
                    window.clone(),
                    policy.clone(),
                    pilot_rng,
                )?))
            }
            crate::model::ModelSpec::MovingMaximum { .. } => Ok(FieldSimulator::MovingMaximum {
                spec: spec.clone(),
                window: window.clone(),
                policy: policy.clone(),
            }),
        }
    }

    /// The observation window.
    pub fn window(&self) -> &Arc<LatticeWindow> {
        match self {
            FieldSimulator::BrownResnick(sampler) => sampler.window(),
            FieldSimulator::MovingMaximum { window, .. } => window,
        }
    }

    /// Draws one field replicate.
    pub fn draw(&self, rng: &mut crate::rng::StreamRng) -> crate::error::Result<FieldSample<F>> {
        match self {
            FieldSimulator::BrownResnick(sampler) => Ok(sampler.sample(rng)),
            FieldSimulator::MovingMaximum {
                spec,
                window,
                policy,
            } => simulate_moving_maximum(spec, window, rng, policy).map(|(field, _)| field),
        }
    }

    /// Draws one field replicate together with its retained atoms.
    ///
    /// Brown–Resnick atoms are not retained (truncation makes the atom set
    /// approximate), so the point-process side is `None` for that family.
    pub fn draw_with_atoms(
        &self,
        rng: &mut crate::rng::StreamRng,
    ) -> crate::error::Result<(FieldSample<F>, Option<PointProcessSample<F>>)> {
        match self {
            FieldSimulator::BrownResnick(sampler) => Ok((sampler.sample(rng), None)),
            FieldSimulator::MovingMaximum {
                spec,
                window,
                policy,
            } => simulate_moving_maximum(spec, window, rng, policy)
                .map(|(field, pp)| (field, Some(pp))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::KernelSpec;

    #[test]
    fn truncation_policy_default_is_valid_and_bad_fields_are_rejected() {
        let policy: TruncationPolicy<f64> = TruncationPolicy::default();
        assert!(policy.validate().is_ok());
        assert!(
            TruncationPolicy::<f64> {
                max_atoms: 0,
                ..TruncationPolicy::default()
            }
            .validate()
            .is_err()
        );
        assert!(
            TruncationPolicy::<f64> {
                bias_epsilon: 0.0,
                ..TruncationPolicy::default()
            }
            .validate()
            .is_err()
        );
        assert!(
            TruncationPolicy::<f64> {
                depth_factor: 1.5,
                ..TruncationPolicy::default()
            }
            .validate()
            .is_err()
        );
    }

    #[test]
    fn field_sample_accessors_and_csv_roundtrip() {
        let window = Arc::new(LatticeWindow::from_box(&[2, 2]).unwrap());
        let sample = FieldSample::new(
            window.clone(),
            vec![1.0f64, 2.0, 3.0, 4.0],
            9,
            17,
            false,
            0.001,
        );
        assert_eq!(sample.value_at(&Site::new([0, 1])), Some(2.0));
        assert_eq!(sample.value_at(&Site::new([5, 5])), None);
        assert_eq!(sample.min_value(), 1.0);
        assert_eq!(sample.atoms_used(), 17);
        let mut buf = Vec::new();
        sample.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("x0,x1,value"));
        assert_eq!(lines.next(), Some("0,0,1"));
        assert_eq!(text.lines().count(), 5);
    }

    #[test]
    fn point_process_reconstruction_takes_pointwise_maxima() {
        let window = Arc::new(LatticeWindow::from_box(&[3]).unwrap());
        let kernel = KernelSpec::indicator_box(1, 1.0).unwrap();
        // Atom 1 centered at 0.5 covers sites 0 and 1; atom 2 at 2.0 covers
        // sites 1 and 2 with smaller weight.
        let atoms = vec![
            Atom {
                weight: 2.0f64,
                datum: SpectralDatum::Location(vec![0.5]),
            },
            Atom {
                weight: 1.0,
                datum: SpectralDatum::Location(vec![2.0]),
            },
        ];
        let pp = PointProcessSample::new(
            window,
            atoms,
            Some(kernel),
            StopInfo {
                reason: StopReason::AdaptiveRule,
                next_weight: 0.5,
                threshold: 0.6,
            },
        );
        assert!(pp.weights_strictly_decreasing());
        let values = pp.field_values();
        // Kernel density is 1/2 on [-1, 1].
        assert_eq!(values, vec![1.0, 1.0, 0.5]);
    }

    #[test]
    fn profile_atoms_contribute_through_stored_values() {
        let window = Arc::new(LatticeWindow::from_box(&[2]).unwrap());
        let atoms = vec![Atom {
            weight: 3.0f64,
            datum: SpectralDatum::Profile(vec![0.5, 2.0]),
        }];
        let pp = PointProcessSample::new(
            window,
            atoms,
            None,
            StopInfo {
                reason: StopReason::AtomBudget,
                next_weight: 2.9,
                threshold: 0.1,
            },
        );
        assert_eq!(pp.field_values(), vec![1.5, 6.0]);
    }
}
