//! Simulation and inference for stationary simple max-stable random fields
//! observed on finite windows of the integer lattice `Z^d`.
//!
//! The crate provides:
//!
//! - exact-in-law simulation of Brown–Resnick and moving-maximum fields from
//!   their Poisson point process representations ([`simulate`]);
//! - analytic, quadrature, and Monte Carlo evaluation of extremal
//!   coefficients ([`theta`]);
//! - nonparametric estimators of pair extremal coefficients with asymptotic
//!   variances ([`estimators`]);
//! - computable upper bounds on absolute-regularity and strong-mixing
//!   coefficients, and a central-limit-theorem condition checker
//!   ([`mixing`]);
//! - a laboratory for the extremal/subextremal decomposition of the
//!   underlying point process, including an exact conditional coupling
//!   ([`pointprocess`]).
//!
//! All numerics are generic over the floating-point scalar via
//! [`scalar::Scalar`]; `f64` aliases for the main model types are exported at
//! the crate root.

pub mod error;
pub mod estimators;
pub mod lattice;
pub mod mixing;
pub mod model;
pub mod pointprocess;
pub mod rng;
pub mod scalar;
pub mod simulate;
pub mod stats;
pub mod theta;

pub use error::{MaxStableError, Result};
pub use estimators::{EstimateReport, EstimatorTag, Sigma1Options, Sigma1Series, VarianceMethod};
pub use lattice::{LatticeWindow, Site};
pub use mixing::{
    beta_bound_compact, beta_bound_countable, beta_bound_family, bolthausen_alpha_bound,
    clt_condition_check, clt_condition_check_profile, gamma_bound, BoundFamily, BoundTerm,
    CltConditionReport, MixingBoundReport,
};
pub use model::{KernelSpec, ModelSpec, VariogramSpec};
pub use pointprocess::{
    build_coupling, classify_extremal, conditional_law_check, mc_shared_extremal_prob,
    slyvniak_integral, AtomOrigin, ConditionalLawReport, CoupledProcess, ExtremalDecomposition,
    SharedExtremalReport, SlyvniakReport,
};
pub use scalar::{SampleScalar, Scalar};
pub use simulate::{FieldSample, PointProcessSample, TruncationPolicy};

/// Double-precision aliases for the main model and sample types.
pub type ModelSpec64 = model::ModelSpec<f64>;
/// Double-precision variogram specification.
pub type VariogramSpec64 = model::VariogramSpec<f64>;
/// Double-precision kernel specification.
pub type KernelSpec64 = model::KernelSpec<f64>;
/// Double-precision field sample.
pub type FieldSample64 = simulate::FieldSample<f64>;
/// Double-precision atom record.
pub type PointProcessSample64 = simulate::PointProcessSample<f64>;
/// Double-precision truncation policy.
pub type TruncationPolicy64 = simulate::TruncationPolicy<f64>;
