//! Error types shared across the library.

use thiserror::Error;

/// Failure modes of the numerical routines.
///
/// Diagnostic payloads are carried as `f64` regardless of the working scalar.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),

    #[error("unsupported Gell-Mann index {0} (supported: 1, 2, 4)")]
    UnsupportedIndex(usize),

    #[error("subspaces not separable: inter-band gap {gap:.3e} below threshold {threshold:.3e}")]
    DegeneracyCollision { gap: f64, threshold: f64 },

    #[error("subspace is not conjugation-invariant: residual {residual:.3e}")]
    NotRealizable { residual: f64 },

    #[error("frame transport broke down: |det O| = {overlap_det:.3e} <= 0.1")]
    FrameBreakdown { overlap_det: f64 },

    #[error("mesh too coarse: error estimate {estimate:.3e} exceeds {tolerance:.3e}")]
    MeshTooCoarse { estimate: f64, tolerance: f64 },

    #[error("integration tail too fat: extrapolated tail {tail:.3e} exceeds {limit:.3e}")]
    TailTooFat { tail: f64, limit: f64 },

    #[error("integrand varies with theta by {variation:.3e}; rotational symmetry violated")]
    NonRotationalSymmetry { variation: f64 },

    #[error("time step too coarse: n_ex changed by {change:.3e} after two refinements")]
    StepTooCoarse { change: f64 },

    #[error("velocity-squared fit failed: relative residual {residual:.3e}")]
    FitFailure { residual: f64 },

    #[error("coefficient map orientation degenerate (|z| = {norm:.3e}); 3-form undefined here")]
    OrientationDegenerate { norm: f64 },

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
}

pub type Result<T> = std::result::Result<T, Error>;
