//! Atom-level laboratory for the Poisson representation of max-stable
//! fields: extremal/subextremal decomposition, an exact conditional
//! coupling, and Monte Carlo identity checks on small site sets.
//!
//! Relative to a reference site set `S`, an atom `φ` is *S-subextremal*
//! when `φ(s) < η(s)` at every `s ∈ S` (it contributes nothing to the
//! maximum on `S`) and *S-extremal* otherwise, i.e. when it attains
//! `η(s)` somewhere on `S`. The decomposition drives a coupling: given an
//! independent copy `Φ̃` of the process, the merged process
//!
//! `Φ̂ = Φ⁺_{S} ∪ {φ̃ ∈ Φ̃ : φ̃ <_S η}`
//!
//! has the same law as `Φ` while agreeing with `Φ` exactly on `S`
//! ([`build_coupling`]). The probability that some atom is extremal for two
//! disjoint sets simultaneously controls the β-mixing coefficient between
//! them; [`mc_shared_extremal_prob`] estimates that probability and
//! [`slyvniak_integral`] evaluates the intensity integral that dominates it,
//! `∫ P[f ⊀_{S₁} η, f ⊀_{S₂} η] μ(df)`.
//!
//! Defaults are tuned to moving-maximum models with compactly supported
//! kernels, where atom retention is exact and the bit-level invariants hold
//! without qualification; Brown–Resnick atoms are accepted by the
//! classification and coupling routines but carry truncation bias.

use std::collections::BTreeSet;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{MaxStableError, Result};
use crate::estimators::theta_hat2;
use crate::lattice::{LatticeWindow, Site};
use crate::model::{KernelSpec, ModelSpec};
use crate::rng::StreamRng;
use crate::scalar::{SampleScalar, Scalar};
use crate::simulate::{
    location_contribution, simulate_moving_maximum, Atom, FieldSample, PointProcessSample,
    SpectralDatum, TruncationPolicy,
};
use crate::stats::{mean, sample_variance, two_sample_ks, two_sample_ks_p_value};

/// Partition of the retained atoms relative to a reference site set.
#[derive(Debug, Clone, Serialize)]
pub struct ExtremalDecomposition {
    /// The reference sites `S` (deduplicated, sorted).
    pub reference: Vec<Site>,
    /// Indices of atoms attaining the field maximum somewhere on `S`.
    pub extremal: Vec<usize>,
    /// Indices of atoms strictly below the field everywhere on `S`.
    pub subextremal: Vec<usize>,
    /// Number of reference sites where two or more atoms tie at the
    /// maximum (probability zero under continuous models).
    pub tied_sites: usize,
}

/// Contribution of one atom at a window site, shared by every routine in
/// this module so comparisons are bit-identical with simulation.
fn atom_contribution<F: Scalar>(
    kernel: Option<&KernelSpec<F>>,
    window: &LatticeWindow,
    atom: &Atom<F>,
    site_idx: usize,
) -> F {
    match &atom.datum {
        SpectralDatum::Profile(profile) => atom.weight * profile[site_idx],
        SpectralDatum::Location(u) => location_contribution(
            kernel.expect("location atoms require a kernel"),
            atom.weight,
            u,
            &window.sites()[site_idx],
        ),
    }
}

/// Resolves reference sites to window indices, deduplicated and sorted.
fn reference_indices(window: &LatticeWindow, s: &[Site]) -> Result<(Vec<Site>, Vec<usize>)> {
    if s.is_empty() {
        return Err(MaxStableError::EmptySiteSet {
            context: "extremal classification needs a nonempty reference set",
        });
    }
    let sites: Vec<Site> = s.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    let mut indices = Vec::with_capacity(sites.len());
    for site in &sites {
        match window.index_of(site) {
            Some(i) => indices.push(i),
            None => {
                return Err(MaxStableError::InconsistentSample {
                    message: format!("reference site {site} lies outside the sample window"),
                })
            }
        }
    }
    Ok((sites, indices))
}

/// Core classification on resolved inputs; exact comparisons throughout.
fn classify_atoms<F: Scalar>(
    kernel: Option<&KernelSpec<F>>,
    window: &LatticeWindow,
    atoms: &[Atom<F>],
    eta: &[F],
    reference: Vec<Site>,
    indices: &[usize],
) -> ExtremalDecomposition {
    let mut extremal = Vec::new();
    let mut subextremal = Vec::new();
    for (i, atom) in atoms.iter().enumerate() {
        let attains = indices
            .iter()
            .any(|&s| atom_contribution(kernel, window, atom, s) == eta[s]);
        if attains {
            extremal.push(i);
        } else {
            subextremal.push(i);
        }
    }
    let tied_sites = indices
        .iter()
        .filter(|&&s| {
            atoms
                .iter()
                .filter(|atom| atom_contribution(kernel, window, atom, s) == eta[s])
                .count()
                > 1
        })
        .count();
    ExtremalDecomposition {
        reference,
        extremal,
        subextremal,
        tied_sites,
    }
}

/// Splits the atoms of `pp` into extremal and subextremal relative to `s`.
///
/// `field` must be the sample produced alongside `pp`: its values are
/// required to equal the pointwise atom maximum bit-exactly, otherwise the
/// stored-value comparisons are meaningless and an
/// [`MaxStableError::InconsistentSample`] is returned.
pub fn classify_extremal<F: Scalar>(
    pp: &PointProcessSample<F>,
    field: &FieldSample<F>,
    s: &[Site],
) -> Result<ExtremalDecomposition> {
    if pp.window().sites() != field.window().sites() {
        return Err(MaxStableError::InconsistentSample {
            message: "point process and field were generated on different windows".into(),
        });
    }
    let recomputed = pp.field_values();
    if recomputed != field.values() {
        let bad = recomputed
            .iter()
            .zip(field.values())
            .position(|(a, b)| a != b)
            .expect("some value differs");
        return Err(MaxStableError::InconsistentSample {
            message: format!(
                "field is not the atom maximum at site {} (recomputed {}, stored {})",
                pp.window().sites()[bad],
                recomputed[bad].to_f64_lossy(),
                field.values()[bad].to_f64_lossy(),
            ),
        });
    }
    let (reference, indices) = reference_indices(pp.window(), s)?;
    Ok(classify_atoms(
        pp.kernel(),
        pp.window(),
        pp.atoms(),
        field.values(),
        reference,
        &indices,
    ))
}

/// Where an atom of a coupled process came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AtomOrigin {
    /// Kept from the original process (it was `S₁`-extremal there).
    Retained,
    /// Taken from the independent copy (it was strictly below the original
    /// field on `S₁`).
    Thinned,
}

/// The coupled process `Φ̂ = Φ⁺_{S₁} ∪ {φ̃ ∈ Φ̃ : φ̃ <_{S₁} η}` with
/// per-atom provenance and its realized field.
#[derive(Debug, Clone)]
pub struct CoupledProcess<F> {
    window: Arc<LatticeWindow>,
    kernel: Option<KernelSpec<F>>,
    atoms: Vec<Atom<F>>,
    origins: Vec<AtomOrigin>,
    values: Vec<F>,
    base_decomposition: ExtremalDecomposition,
}

impl<F: Scalar> CoupledProcess<F> {
    /// The common observation window.
    pub fn window(&self) -> &Arc<LatticeWindow> {
        &self.window
    }

    /// Atoms of `Φ̂` in decreasing weight order.
    pub fn atoms(&self) -> &[Atom<F>] {
        &self.atoms
    }

    /// Origin tags aligned with [`CoupledProcess::atoms`].
    pub fn origins(&self) -> &[AtomOrigin] {
        &self.origins
    }

    /// The coupled field `η̂` aligned with the window sites.
    pub fn values(&self) -> &[F] {
        &self.values
    }

    /// Decomposition of the *original* process that the construction used.
    pub fn base_decomposition(&self) -> &ExtremalDecomposition {
        &self.base_decomposition
    }

    /// Number of atoms kept from the original process.
    pub fn retained_len(&self) -> usize {
        self.origins
            .iter()
            .filter(|o| **o == AtomOrigin::Retained)
            .count()
    }

    /// Number of atoms adopted from the independent copy.
    pub fn thinned_len(&self) -> usize {
        self.origins.len() - self.retained_len()
    }

    /// Contribution of one coupled atom at a window site.
    pub fn contribution(&self, atom_idx: usize, site_idx: usize) -> F {
        atom_contribution(
            self.kernel.as_ref(),
            &self.window,
            &self.atoms[atom_idx],
            site_idx,
        )
    }

    /// Classifies the coupled atoms relative to `s` against `η̂`.
    pub fn decompose(&self, s: &[Site]) -> Result<ExtremalDecomposition> {
        let (reference, indices) = reference_indices(&self.window, s)?;
        Ok(classify_atoms(
            self.kernel.as_ref(),
            &self.window,
            &self.atoms,
            &self.values,
            reference,
            &indices,
        ))
    }

    /// Wraps the coupled field as a sample for estimator comparisons.
    pub fn to_field_sample(&self, seed: u64) -> FieldSample<F> {
        FieldSample::new(
            self.window.clone(),
            self.values.clone(),
            seed,
            self.atoms.len(),
            false,
            0.0,
        )
    }
}

/// Builds the coupling of `pp` with the independent copy `pp_tilde`
/// relative to `s1`: the `S₁`-extremal atoms of `pp` are retained and the
/// atoms of `pp_tilde` strictly below `pp`'s field on `S₁` are adopted.
///
/// The resulting field equals `pp`'s field on `S₁` bit-exactly, and the
/// retained atoms are exactly the `S₁`-extremal atoms of the coupled
/// process itself.
pub fn build_coupling<F: Scalar>(
    pp: &PointProcessSample<F>,
    pp_tilde: &PointProcessSample<F>,
    s1: &[Site],
) -> Result<CoupledProcess<F>> {
    if pp.window().sites() != pp_tilde.window().sites() {
        return Err(MaxStableError::InconsistentSample {
            message: "coupled processes must share one observation window".into(),
        });
    }
    let kernel = match (pp.kernel(), pp_tilde.kernel()) {
        (Some(a), Some(b)) if a == b => Some(a.clone()),
        (None, None) => None,
        _ => {
            return Err(MaxStableError::InconsistentSample {
                message: "coupled processes must come from the same model".into(),
            })
        }
    };
    let window = pp.window().clone();
    let eta = pp.field_values();
    let (reference, indices) = reference_indices(&window, s1)?;
    let base =
        classify_atoms(kernel.as_ref(), &window, pp.atoms(), &eta, reference, &indices);

    let mut tagged: Vec<(Atom<F>, AtomOrigin)> = Vec::new();
    for &i in &base.extremal {
        tagged.push((pp.atoms()[i].clone(), AtomOrigin::Retained));
    }
    for atom in pp_tilde.atoms() {
        let below = indices
            .iter()
            .all(|&s| atom_contribution(kernel.as_ref(), &window, atom, s) < eta[s]);
        if below {
            tagged.push((atom.clone(), AtomOrigin::Thinned));
        }
    }
    tagged.sort_by(|a, b| {
        b.0.weight
            .partial_cmp(&a.0.weight)
            .expect("atom weights are finite")
    });
    let (atoms, origins): (Vec<_>, Vec<_>) = tagged.into_iter().unzip();

    let mut values = vec![F::zero(); window.len()];
    for atom in &atoms {
        for (i, v) in values.iter_mut().enumerate() {
            let c = atom_contribution(kernel.as_ref(), &window, atom, i);
            if c > *v {
                *v = c;
            }
        }
    }
    Ok(CoupledProcess {
        window,
        kernel,
        atoms,
        origins,
        values,
        base_decomposition: base,
    })
}

/// Validates that two reference sets are nonempty and disjoint.
fn disjoint_sets(s1: &[Site], s2: &[Site]) -> Result<(Vec<Site>, Vec<Site>)> {
    if s1.is_empty() || s2.is_empty() {
        return Err(MaxStableError::EmptySiteSet {
            context: "shared-extremal probabilities need two nonempty site sets",
        });
    }
    let a: BTreeSet<Site> = s1.iter().cloned().collect();
    let b: BTreeSet<Site> = s2.iter().cloned().collect();
    let shared: Vec<&Site> = a.intersection(&b).collect();
    if !shared.is_empty() {
        return Err(MaxStableError::SetsNotDisjoint {
            shared: shared.len(),
            first: shared[0].to_string(),
        });
    }
    Ok((a.into_iter().collect(), b.into_iter().collect()))
}

fn require_moving_maximum<F: Scalar>(spec: &ModelSpec<F>) -> Result<&KernelSpec<F>> {
    spec.kernel().ok_or(MaxStableError::WrongModel {
        expected: "moving-maximum",
        actual: "Brown–Resnick",
    })
}

/// Monte Carlo estimate of `P[Φ⁺_{S₁} ∩ Φ⁺_{S₂} ≠ ∅]`.
#[derive(Debug, Clone, Serialize)]
pub struct SharedExtremalReport {
    /// Empirical frequency of a shared extremal atom.
    pub probability: f64,
    /// Binomial standard error.
    pub std_error: f64,
    /// Replicates entering the estimate.
    pub replicates_used: usize,
    /// Replicates discarded because the atom budget truncated them.
    pub excluded_truncated: usize,
}

/// Estimates the probability that some atom is simultaneously extremal for
/// both (disjoint) site sets — the quantity controlling the β-mixing
/// coefficient between the two restrictions.
///
/// Moving-maximum models only: their stopping rule retains every atom that
/// attains the field maximum anywhere, so classification is exact.
/// Truncation-flagged replicates are excluded and counted.
pub fn mc_shared_extremal_prob<F: SampleScalar>(
    spec: &ModelSpec<F>,
    s1: &[Site],
    s2: &[Site],
    replicates: usize,
    rng: &mut StreamRng,
) -> Result<SharedExtremalReport> {
    require_moving_maximum(spec)?;
    let (s1, s2) = disjoint_sets(s1, s2)?;
    if replicates < 2 {
        return Err(MaxStableError::invalid(
            "replicates",
            replicates as f64,
            "need at least two replicates",
        ));
    }
    let window = Arc::new(LatticeWindow::from_sites(
        s1.iter().chain(&s2).cloned().collect(),
    )?);
    let idx1: Vec<usize> = s1.iter().map(|s| window.index_of(s).unwrap()).collect();
    let idx2: Vec<usize> = s2.iter().map(|s| window.index_of(s).unwrap()).collect();
    let policy = TruncationPolicy::default();

    let mut hits = 0usize;
    let mut excluded = 0usize;
    for _ in 0..replicates {
        let (field, pp) = simulate_moving_maximum(spec, &window, rng, &policy)?;
        if field.truncation_flagged() {
            excluded += 1;
            continue;
        }
        let eta = field.values();
        let shared = pp.atoms().iter().any(|atom| {
            idx1.iter()
                .any(|&s| atom_contribution(pp.kernel(), &window, atom, s) == eta[s])
                && idx2
                    .iter()
                    .any(|&s| atom_contribution(pp.kernel(), &window, atom, s) == eta[s])
        });
        if shared {
            hits += 1;
        }
    }
    let used = replicates - excluded;
    if used == 0 {
        return Err(MaxStableError::DegenerateStatistic {
            context: "mc_shared_extremal_prob",
            message: "every replicate was truncation-flagged".into(),
        });
    }
    let p = hits as f64 / used as f64;
    Ok(SharedExtremalReport {
        probability: p,
        std_error: (p * (1.0 - p) / used as f64).sqrt(),
        replicates_used: used,
        excluded_truncated: excluded,
    })
}

/// Value of the intensity integral `∫ P[f ⊀_{S₁} η, f ⊀_{S₂} η] μ(df)`.
#[derive(Debug, Clone, Serialize)]
pub struct SlyvniakReport {
    /// The integral estimate.
    pub value: f64,
    /// Monte Carlo standard error (across the inner field replicates).
    pub mc_std_error: f64,
    /// Quadrature self-consistency error (difference against half the
    /// spatial resolution).
    pub quadrature_error: f64,
    /// Midpoint nodes per axis used for the location integral.
    pub nodes_per_axis: usize,
    /// Independent field draws behind the inner probability.
    pub inner_replicates: usize,
    /// Set when the Monte Carlo error dominates the value.
    pub warning: Option<String>,
}

/// Evaluates the intensity integral that dominates the shared-extremal
/// probability, for moving-maximum models with intensity `z⁻² dz du`.
///
/// For a fixed kernel translate `u` and field draw `η`, the atom weights
/// `z` for which `z·f(·−u)` exceeds `η` somewhere on `Sᵢ` form the ray
/// `z ≥ 1/mᵢ` with `mᵢ = max_{s∈Sᵢ} f(s−u)/η(s)`, so the `z`-integral
/// collapses analytically to `min(m₁, m₂)`. The remaining location integral
/// is evaluated by the midpoint rule over the bounding box of `S₁ ∪ S₂`
/// inflated by the kernel support radius, with the field expectation taken
/// over independent draws.
pub fn slyvniak_integral<F: SampleScalar>(
    spec: &ModelSpec<F>,
    s1: &[Site],
    s2: &[Site],
    nodes_per_axis: usize,
    inner_replicates: usize,
    rng: &mut StreamRng,
) -> Result<SlyvniakReport> {
    let kernel = require_moving_maximum(spec)?.clone();
    let (s1, s2) = disjoint_sets(s1, s2)?;
    if nodes_per_axis < 2 {
        return Err(MaxStableError::invalid(
            "nodes_per_axis",
            nodes_per_axis as f64,
            "the quadrature needs at least two nodes per axis",
        ));
    }
    if inner_replicates < 2 {
        return Err(MaxStableError::invalid(
            "inner_replicates",
            inner_replicates as f64,
            "the inner Monte Carlo needs at least two draws",
        ));
    }
    let window = Arc::new(LatticeWindow::from_sites(
        s1.iter().chain(&s2).cloned().collect(),
    )?);
    let idx1: Vec<usize> = s1.iter().map(|s| window.index_of(s).unwrap()).collect();
    let idx2: Vec<usize> = s2.iter().map(|s| window.index_of(s).unwrap()).collect();

    let policy = TruncationPolicy::default();
    let mut fields = Vec::with_capacity(inner_replicates);
    for _ in 0..inner_replicates {
        let (field, _) = simulate_moving_maximum(spec, &window, rng, &policy)?;
        fields.push(field);
    }

    let dim = window.dim();
    let radius = kernel.radius().to_f64_lossy();
    let (lo, hi) = window.bounding_box();
    let lo: Vec<f64> = lo.iter().map(|&c| c as f64 - radius).collect();
    let hi: Vec<f64> = hi.iter().map(|&c| c as f64 + radius).collect();

    // One quadrature pass at `nodes` midpoints per axis: for each field
    // draw, sum min(m₁, m₂) over the location grid.
    let quadrature = |nodes: usize| -> Vec<f64> {
        let steps: Vec<f64> = lo
            .iter()
            .zip(&hi)
            .map(|(&a, &b)| (b - a) / nodes as f64)
            .collect();
        let cell: f64 = steps.iter().product();
        let mut integrals = vec![0.0f64; fields.len()];
        let mut node = vec![0usize; dim];
        loop {
            let u: Vec<f64> = node
                .iter()
                .zip(&lo)
                .zip(&steps)
                .map(|((&k, &a), &step)| a + (k as f64 + 0.5) * step)
                .collect();
            // Kernel values at the reference sites for this translate.
            let k_at = |s: usize| -> f64 {
                let dx: Vec<F> = window.sites()[s]
                    .coords()
                    .iter()
                    .zip(&u)
                    .map(|(&c, &uk)| F::of(c as f64 - uk))
                    .collect();
                kernel.eval(&dx).to_f64_lossy()
            };
            let k1: Vec<f64> = idx1.iter().map(|&s| k_at(s)).collect();
            let k2: Vec<f64> = idx2.iter().map(|&s| k_at(s)).collect();
            if k1.iter().any(|&k| k > 0.0) && k2.iter().any(|&k| k > 0.0) {
                for (field, integral) in fields.iter().zip(&mut integrals) {
                    let eta = field.values();
                    let m = |idx: &[usize], ks: &[f64]| -> f64 {
                        idx.iter()
                            .zip(ks)
                            .map(|(&s, &k)| k / eta[s].to_f64_lossy())
                            .fold(0.0, f64::max)
                    };
                    *integral += m(&idx1, &k1).min(m(&idx2, &k2)) * cell;
                }
            }
            // Odometer over the d-dimensional node grid.
            let mut axis = dim;
            loop {
                if axis == 0 {
                    return integrals;
                }
                axis -= 1;
                node[axis] += 1;
                if node[axis] < nodes {
                    break;
                }
                node[axis] = 0;
            }
        }
    };

    let fine = quadrature(nodes_per_axis);
    let coarse = quadrature(nodes_per_axis / 2);
    let value = mean(&fine);
    let mc_std_error = (sample_variance(&fine) / fine.len() as f64).sqrt();
    let quadrature_error = (value - mean(&coarse)).abs();
    let mut warning = None;
    if value > 0.0 && mc_std_error > 0.5 * value {
        warning = Some(format!(
            "inner Monte Carlo error {mc_std_error:.3e} dominates the value {value:.3e}; \
             increase inner_replicates"
        ));
    }
    if kernel.tail_mass() > 0.0 {
        let note = "kernel mass outside the integration box is neglected";
        warning = Some(match warning {
            Some(w) => format!("{w}; {note}"),
            None => note.into(),
        });
    }
    Ok(SlyvniakReport {
        value,
        mc_std_error,
        quadrature_error,
        nodes_per_axis,
        inner_replicates,
        warning,
    })
}

/// Two-sample comparison of the coupled process against direct simulation.
#[derive(Debug, Clone, Serialize)]
pub struct ConditionalLawReport {
    /// Replicate pairs entering the comparison.
    pub replicates_used: usize,
    /// Replicate pairs excluded (truncation flag or count-functional
    /// validity failure).
    pub excluded: usize,
    /// Two-sample KS distance between the atom-count functionals.
    pub atom_count_ks: f64,
    /// Asymptotic p-value of the atom-count comparison.
    pub atom_count_p: f64,
    /// Contribution threshold defining the atom-count functional.
    pub count_threshold: f64,
    /// Worst (largest) per-site KS distance between `η̂` and `η` marginals.
    pub marginal_ks_max: f64,
    /// Smallest per-site marginal p-value.
    pub marginal_p_min: f64,
    /// Site attaining the worst marginal distance.
    pub worst_site: String,
    /// Mean pair-coefficient estimate over direct replicates, with the
    /// standard error of that mean.
    pub theta_direct: f64,
    pub theta_direct_se: f64,
    /// Same for the coupled replicates.
    pub theta_coupled: f64,
    pub theta_coupled_se: f64,
}

/// Tests the conditional-law consequence of the coupling: the coupled
/// process must be indistinguishable from direct simulation.
///
/// Per replicate pair, two independent processes are drawn on `window`,
/// coupled relative to `s`, and compared against the direct draw through
/// (i) an atom-count functional (atoms whose best contribution exceeds a
/// fixed threshold — computable exactly on both sides thanks to the
/// deepened retention rule), (ii) per-site marginals of the realized
/// fields, and (iii) the min-inverse pair-coefficient estimate at the unit
/// axis lag.
pub fn conditional_law_check<F: SampleScalar>(
    spec: &ModelSpec<F>,
    window: &Arc<LatticeWindow>,
    s: &[Site],
    replicates: usize,
    rng: &mut StreamRng,
) -> Result<ConditionalLawReport> {
    require_moving_maximum(spec)?;
    if replicates < 10 {
        return Err(MaxStableError::invalid(
            "replicates",
            replicates as f64,
            "the two-sample comparison needs at least ten replicates",
        ));
    }
    let (_, _) = reference_indices(window, s)?;
    // Deepened retention so the count functional sees every atom above the
    // threshold on both sides of the comparison.
    let policy = TruncationPolicy {
        depth_factor: F::of(0.5),
        ..TruncationPolicy::default()
    };
    let count_threshold = 1.0f64;

    // Base sites for the pair estimate at the unit axis lag.
    let lag = {
        let mut coords = vec![0i64; window.dim()];
        coords[0] = 1;
        Site::new(coords)
    };
    let base = LatticeWindow::from_sites(
        window
            .sites()
            .iter()
            .filter(|t| window.index_of(&t.add(&lag)).is_some())
            .cloned()
            .collect(),
    )?;

    let n_sites = window.len();
    let mut counts_direct = Vec::new();
    let mut counts_coupled = Vec::new();
    let mut marg_direct = vec![Vec::new(); n_sites];
    let mut marg_coupled = vec![Vec::new(); n_sites];
    let mut theta_direct = Vec::new();
    let mut theta_coupled = Vec::new();
    let mut excluded = 0usize;

    for _ in 0..replicates {
        let (field, pp) = simulate_moving_maximum(spec, window, rng, &policy)?;
        let (field_tilde, pp_tilde) = simulate_moving_maximum(spec, window, rng, &policy)?;
        if field.truncation_flagged() || field_tilde.truncation_flagged() {
            excluded += 1;
            continue;
        }
        // The count functional is exact only when every atom with best
        // contribution ≥ threshold was retained, i.e. when the retention
        // floor (depth · min η) sits below the threshold on both sides.
        let floor = 0.5 * field.min_value().to_f64_lossy();
        let floor_tilde = 0.5 * field_tilde.min_value().to_f64_lossy();
        if floor > count_threshold || floor_tilde > count_threshold {
            excluded += 1;
            continue;
        }
        let coupled = build_coupling(&pp, &pp_tilde, s)?;
        // Coverage gap: every copy atom over some site was thinned and no
        // retained atom reaches it. The true process fills such sites with
        // atoms below the retention floor, so the finite representation
        // cannot stand in for the law there; skip the pair.
        if coupled.values().iter().any(|v| !(*v > F::zero())) {
            excluded += 1;
            continue;
        }

        let best = |pp: &PointProcessSample<F>, atom: &Atom<F>| -> f64 {
            (0..n_sites)
                .map(|i| atom_contribution(pp.kernel(), window, atom, i).to_f64_lossy())
                .fold(0.0, f64::max)
        };
        counts_direct.push(
            pp.atoms()
                .iter()
                .filter(|a| best(&pp, a) >= count_threshold)
                .count() as f64,
        );
        counts_coupled.push(
            (0..coupled.atoms().len())
                .filter(|&i| {
                    (0..n_sites)
                        .map(|t| coupled.contribution(i, t).to_f64_lossy())
                        .fold(0.0, f64::max)
                        >= count_threshold
                })
                .count() as f64,
        );
        for (i, value) in field.values().iter().enumerate() {
            marg_direct[i].push(value.to_f64_lossy());
        }
        for (i, value) in coupled.values().iter().enumerate() {
            marg_coupled[i].push(value.to_f64_lossy());
        }
        theta_direct.push(theta_hat2(&field, &base, &lag, 0.95)?.theta_hat);
        let coupled_field = coupled.to_field_sample(field.seed());
        theta_coupled.push(theta_hat2(&coupled_field, &base, &lag, 0.95)?.theta_hat);
    }

    let used = counts_direct.len();
    if used < 10 {
        return Err(MaxStableError::DegenerateStatistic {
            context: "conditional_law_check",
            message: format!("only {used} usable replicate pairs"),
        });
    }
    let atom_count_ks = two_sample_ks(&counts_direct, &counts_coupled)?;
    let atom_count_p = two_sample_ks_p_value(atom_count_ks, used, used);
    let mut marginal_ks_max = 0.0f64;
    let mut worst = 0usize;
    for i in 0..n_sites {
        let d = two_sample_ks(&marg_direct[i], &marg_coupled[i])?;
        if d > marginal_ks_max {
            marginal_ks_max = d;
            worst = i;
        }
    }
    let marginal_p_min = two_sample_ks_p_value(marginal_ks_max, used, used);
    Ok(ConditionalLawReport {
        replicates_used: used,
        excluded,
        atom_count_ks,
        atom_count_p,
        count_threshold,
        marginal_ks_max,
        marginal_p_min,
        worst_site: window.sites()[worst].to_string(),
        theta_direct: mean(&theta_direct),
        theta_direct_se: (sample_variance(&theta_direct) / used as f64).sqrt(),
        theta_coupled: mean(&theta_coupled),
        theta_coupled_se: (sample_variance(&theta_coupled) / used as f64).sqrt(),
    })
}
