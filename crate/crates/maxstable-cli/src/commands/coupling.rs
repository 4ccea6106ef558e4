//! `coupling`: exercise the extremal-decomposition laboratory — the
//! conditional coupling's distributional check, the shared-extremal-atom
//! probability, and the intensity integral that bounds it from above.

use std::path::Path;

use serde::Serialize;

use maxstable::rng::{stream_id, stream_rng, StreamDomain};
use maxstable::{
    conditional_law_check, mc_shared_extremal_prob, slyvniak_integral, ConditionalLawReport,
    SharedExtremalReport, Site, SlyvniakReport,
};

use crate::commands::CommandOutcome;
use crate::config::{ExperimentConfig, ModelKind};
use crate::output::{write_json, Manifest};
use crate::CliError;

#[derive(Debug, Serialize)]
struct CouplingDocument {
    /// Sites the coupling conditioned on.
    conditioning_sites: Vec<Vec<i64>>,
    /// Distributional comparison of coupled vs direct replicates.
    conditional_law: ConditionalLawReport,
    /// The two singleton sets of the shared-extremal experiment.
    set1: Vec<Vec<i64>>,
    set2: Vec<Vec<i64>>,
    /// Monte Carlo probability that one atom is extremal for both sets.
    shared_extremal: SharedExtremalReport,
    /// Intensity integral upper-bounding that probability.
    intensity_integral: SlyvniakReport,
    /// Whether probability ≤ integral within combined error.
    ordering_satisfied: bool,
    /// Slack `integral + tolerance − probability`.
    ordering_margin: f64,
}

pub fn cmd_coupling(config: &ExperimentConfig, out: &Path) -> Result<CommandOutcome, CliError> {
    if config.model != ModelKind::MovingMaximum {
        return Err(CliError::Config(
            "the coupling laboratory needs the moving-maximum model: its atoms are \
             explicit (weight, location) pairs; set `model = moving-maximum`"
                .into(),
        ));
    }
    let spec = config.build_spec()?;
    let window = config.build_window()?;

    // Conditioning sites: configured, or the first few window sites.
    let sites: Vec<Site> = if config.coupling_sites.is_empty() {
        window
            .sites()
            .iter()
            .take(3.min(window.len()))
            .cloned()
            .collect()
    } else {
        config
            .coupling_sites
            .iter()
            .map(|c| Site::new(c.clone()))
            .collect()
    };

    let mut manifest = Manifest::new("coupling", config.seed, config.workers);
    manifest.replicates_requested = config.replicates;
    manifest.config_canonical = config.to_canonical_text();

    let mut law_rng = stream_rng(config.seed, StreamDomain::Coupling, 0);
    let conditional_law =
        conditional_law_check(&spec, &window, &sites, config.replicates, &mut law_rng)?;
    manifest.record_stream(
        "pointprocess",
        "conditional-law",
        None,
        stream_id(StreamDomain::Coupling, 0),
    );

    // Shared-extremal experiment between the origin and one lag step.
    let origin = Site::origin(config.dim);
    let other = origin.add(&config.lag_site(0));
    let set1 = vec![origin];
    let set2 = vec![other];
    let mut shared_rng = stream_rng(config.seed, StreamDomain::Coupling, 1);
    let shared_extremal =
        mc_shared_extremal_prob(&spec, &set1, &set2, config.replicates, &mut shared_rng)?;
    manifest.record_stream(
        "pointprocess",
        "shared-extremal-probability",
        None,
        stream_id(StreamDomain::Coupling, 1),
    );

    let mut integral_rng = stream_rng(config.seed, StreamDomain::IntensityIntegral, 0);
    let intensity_integral = slyvniak_integral(
        &spec,
        &set1,
        &set2,
        config.nodes_per_axis,
        config.inner_replicates,
        &mut integral_rng,
    )?;
    manifest.record_stream(
        "pointprocess",
        "intensity-integral",
        None,
        stream_id(StreamDomain::IntensityIntegral, 0),
    );

    // The exact relation is probability ≤ integral; both sides carry Monte
    // Carlo (and quadrature) noise, so allow three combined standard errors.
    let tolerance = 3.0
        * (shared_extremal.std_error
            + intensity_integral.mc_std_error
            + intensity_integral.quadrature_error)
            .max(1e-3);
    let ordering_margin = intensity_integral.value + tolerance - shared_extremal.probability;
    let ordering_satisfied = ordering_margin >= 0.0;

    let document = CouplingDocument {
        conditioning_sites: sites.iter().map(|s| s.coords().to_vec()).collect(),
        conditional_law,
        set1: set1.iter().map(|s| s.coords().to_vec()).collect(),
        set2: set2.iter().map(|s| s.coords().to_vec()).collect(),
        shared_extremal,
        intensity_integral,
        ordering_satisfied,
        ordering_margin,
    };

    let mut files = Vec::new();
    files.push(write_json(out, "coupling_report.json", &document)?);
    manifest.outputs.push("coupling_report.json".into());
    files.push(manifest.write(out)?);

    let law = &document.conditional_law;
    let summary = format!(
        "coupling: conditional law on {} site(s) — atom-count KS p = {:.4}, worst \
         marginal p = {:.4} ({} of {} replicates used); shared-extremal prob {:.4} \
         vs intensity integral {:.4} → ordering {}",
        document.conditioning_sites.len(),
        law.atom_count_p,
        law.marginal_p_min,
        law.replicates_used,
        config.replicates,
        document.shared_extremal.probability,
        document.intensity_integral.value,
        if ordering_satisfied { "satisfied" } else { "VIOLATED" },
    );
    let test_failure = if ordering_satisfied {
        None
    } else {
        Some(format!(
            "shared-extremal probability {:.5} exceeds the intensity integral {:.5} \
             by more than the combined error {:.5}",
            document.shared_extremal.probability, document.intensity_integral.value, tolerance
        ))
    };
    Ok(CommandOutcome {
        files,
        summary,
        test_failure,
    })
}
