//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Paired legs disagree in dimension, or a leg index is out of range.
    #[error("contraction shape mismatch: {0}")]
    ContractShape(String),

    /// Generic shape violation (reshape, matrixize, gate application).
    #[error("shape error: {0}")]
    Shape(String),

    /// NaN or infinity encountered where finite data is required.
    #[error("non-finite values in {0}")]
    NonFinite(&'static str),

    /// Pseudo-inverse found no eigenvalue above the cutoff.
    #[error("metric is numerically degenerate: no eigenvalue above cutoff")]
    DegenerateMetric,

    /// FTU asked for a metric from an environment that never converged.
    #[error("environment not converged for the current state")]
    StaleEnvironment,

    /// CTMRG produced non-finite tensors during renormalization.
    #[error("CTMRG diverged: non-finite values during renormalization")]
    CtmrgDiverged,

    /// Norm contraction vanished; expectation values are undefined.
    #[error("norm contraction is numerically zero; state is ill-conditioned")]
    IllConditionedState,

    #[error("invalid state: {0}")]
    InvalidState(String),

    /// Operator-basis expansion of a gate left an imaginary residue, which
    /// signals a coding bug rather than a physical condition.
    #[error("operator-basis expansion left imaginary residue {0:.3e}")]
    BasisExpansion(f64),

    /// Hermitian-symmetry violation in a purification quantity.
    #[error("hermitian-symmetry violation: imaginary residue {0:.3e}")]
    SymmetryViolation(f64),

    /// The ALS residual grew between sweeps; the metric is not PSD.
    #[error("ALS residual increased from {prev:.6e} to {curr:.6e} at sweep {sweep}")]
    MonotonicityViolation { sweep: usize, prev: f64, curr: f64 },

    /// The steepest-slope search landed on the boundary of the sampled grid.
    #[error("magnetization crossover not bracketed by the sampled grid")]
    CrossoverNotBracketed,

    #[error("fit did not converge after {0} iterations")]
    FitDidNotConverge(usize),

    #[error("eigenvalue iteration did not converge")]
    EigDidNotConverge,

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
