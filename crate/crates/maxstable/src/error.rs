//! Error types shared across the crate.

use thiserror::Error;

/// Result alias used by all fallible operations in this crate.
pub type Result<T> = std::result::Result<T, MaxStableError>;

/// Unified error type for model construction, simulation, and inference.
#[derive(Debug, Error)]
pub enum MaxStableError {
    /// A parameter was outside its admissible range.
    #[error("invalid parameter `{name}`: {message} (got {value})")]
    InvalidParameter {
        name: &'static str,
        message: String,
        value: f64,
    },

    /// Two inputs disagreed on the lattice dimension.
    #[error("dimension mismatch: {context} expects dimension {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    /// A site set or window was empty where a nonempty one is required.
    #[error("empty site set: {context}")]
    EmptySiteSet { context: &'static str },

    /// The covariance matrix of the Gaussian increments failed to factor.
    #[error(
        "covariance matrix is not positive semi-definite at pivot {pivot} \
         (value {pivot_value:.6e} after jitter {jitter:.3e})"
    )]
    NotPositiveSemiDefinite {
        pivot: usize,
        pivot_value: f64,
        jitter: f64,
    },

    /// An estimator was asked for sites that the sample does not contain.
    #[error(
        "sample window does not cover the requested lag {lag:?}: \
         {missing} of {required} shifted sites are missing (first: {first_missing})"
    )]
    MissingShiftedSites {
        lag: Vec<i64>,
        missing: usize,
        required: usize,
        first_missing: String,
    },

    /// An empirical quantity was degenerate (e.g. an all-zero denominator).
    #[error("degenerate statistic in {context}: {message}")]
    DegenerateStatistic {
        context: &'static str,
        message: String,
    },

    /// A numerical procedure failed to converge within its budget.
    #[error("{procedure} did not converge: {message}")]
    NonConvergent {
        procedure: &'static str,
        message: String,
    },

    /// The window family violates the boundary-to-volume growth requirement.
    #[error(
        "window family fails the boundary condition: boundary ratio {ratio:.3} \
         exceeds {limit:.3} at window of size {size}"
    )]
    BoundaryRatioExceeded { ratio: f64, limit: f64, size: usize },

    /// Mixing bounds are only defined for disjoint site sets.
    #[error("site sets must be disjoint: {shared} shared site(s), first {first}")]
    SetsNotDisjoint { shared: usize, first: String },

    /// A point-process operation received inconsistent atoms and field values.
    #[error("point process and field disagree: {message}")]
    InconsistentSample { message: String },

    /// An operation received the wrong model family.
    #[error("operation requires a {expected} model, got {actual}")]
    WrongModel {
        expected: &'static str,
        actual: &'static str,
    },
}

impl MaxStableError {
    /// Convenience constructor for [`MaxStableError::InvalidParameter`].
    pub fn invalid(name: &'static str, value: f64, message: impl Into<String>) -> Self {
        MaxStableError::InvalidParameter {
            name,
            message: message.into(),
            value,
        }
    }
}
