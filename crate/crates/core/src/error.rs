//! Error type shared across the workspace.
//!
//! Every failure mode carries a stable machine-readable code (used by the CLI
//! for its stderr JSON) and maps to one of two exit classes: validation
//! errors (bad input, exit 2) and solver/runtime errors (exit 3).

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// All error conditions surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A measure spec failed validation (bad dimension, weights, shape, ...).
    #[error("invalid measure spec: {0}")]
    InvalidSpec(String),

    /// A documented precondition of an API was violated by the caller.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Two arguments disagree on the ambient dimension.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// Discretizing a measure lost more tail mass than the caller allowed.
    #[error("tail too heavy: {0}")]
    TailTooHeavy(String),

    /// The discretized measure has no mass.
    #[error("empty measure: {0}")]
    EmptyMeasure(String),

    /// An exhaustive routine was asked to handle an instance beyond its size cap.
    #[error("instance too large: {0}")]
    TooLarge(String),

    /// The empirical density functional needs p < d.
    #[error("exponent out of range: {0}")]
    ExponentOutOfRange(String),

    /// A point left the domain required by a construction.
    #[error("point out of domain: {0}")]
    OutOfDomain(String),

    /// A sweep contains no usable rows.
    #[error("empty sweep: {0}")]
    EmptySweep(String),

    /// Input file could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),

    /// Filesystem failure while reading or writing artifacts.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// The transport instance exceeds the configured cell limit.
    #[error("solver limit exceeded: {0} nonzero cells, limit {1}")]
    SolverLimitExceeded(usize, usize),

    /// The grid is too coarse for the requested construction.
    #[error("grid too coarse: {0}")]
    TooCoarse(String),

    /// A greedy extraction ran out of mass.
    #[error("insufficient mass: {0}")]
    InsufficientMass(String),

    /// A regression had no variation to fit.
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    /// Internal invariant violation; indicates a bug, not bad input.
    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    /// Stable machine-readable code for the CLI's stderr JSON.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidSpec(_) => "invalid_spec",
            Error::Precondition(_) => "precondition",
            Error::DimensionMismatch(_) => "dimension_mismatch",
            Error::TailTooHeavy(_) => "tail_too_heavy",
            Error::EmptyMeasure(_) => "empty_measure",
            Error::TooLarge(_) => "too_large",
            Error::ExponentOutOfRange(_) => "exponent_out_of_range",
            Error::OutOfDomain(_) => "out_of_domain",
            Error::EmptySweep(_) => "empty_sweep",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
            Error::SolverLimitExceeded(..) => "solver_limit_exceeded",
            Error::TooCoarse(_) => "too_coarse",
            Error::InsufficientMass(_) => "insufficient_mass",
            Error::DegenerateFit(_) => "degenerate_fit",
            Error::Internal(_) => "internal",
        }
    }

    /// Process exit code class: 2 for validation errors, 3 for solver failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidSpec(_)
            | Error::Precondition(_)
            | Error::DimensionMismatch(_)
            | Error::TailTooHeavy(_)
            | Error::EmptyMeasure(_)
            | Error::TooLarge(_)
            | Error::ExponentOutOfRange(_)
            | Error::OutOfDomain(_)
            | Error::EmptySweep(_)
            | Error::Parse(_)
            | Error::Io(_) => 2,
            Error::SolverLimitExceeded(..)
            | Error::TooCoarse(_)
            | Error::InsufficientMass(_)
            | Error::DegenerateFit(_)
            | Error::Internal(_) => 3,
        }
    }
}
