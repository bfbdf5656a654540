use thiserror::Error;

use crate::model::ValidationReport;

/// Errors surfaced by chain assembly, spectral solves, evaluators, and samplers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("model validation failed:\n{0}")]
    Validation(ValidationReport),

    #[error("eigensolver did not converge ({0})")]
    Eigensolver(String),

    #[error("spectral gap {gap:e} below 1e-10; conditional limits need a simple principal eigenvalue")]
    DegenerateGap { gap: f64 },

    #[error("ground state entry {value:e} at state {index} is negative beyond tolerance; irreducibility is broken")]
    NonPositiveGroundState { index: usize, value: f64 },

    #[error("stale spectral data: eigenpair residual {residual:e} for this chain and weight")]
    StaleSpectralData { residual: f64 },

    #[error("degenerate conditioning: no path survived (survival estimate {survival_estimate:e})")]
    DegenerateConditioning { survival_estimate: f64 },

    #[error("gamma {gamma} outside the attainable deviation range ({lo}, {hi})")]
    GammaOutOfRange { gamma: f64, lo: f64, hi: f64 },

    #[error("numeric invariant violated: {0}")]
    InvariantViolation(String),
}
