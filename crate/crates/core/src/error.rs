use thiserror::Error;

/// Errors produced anywhere in the estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside the domain of the operation (negative lag, time outside window).
    #[error("domain error: {0}")]
    Domain(String),

    /// Input data violates a type invariant.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A configuration value cannot be used (basis too small, unknown model tag, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// The intensity at an event could not be represented as a finite positive number.
    #[error("numerical overflow in intensity at event index {index}")]
    Overflow { index: usize },

    /// A matrix that must be positive definite was not.
    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    /// The MAP iteration hit its iteration cap.
    #[error("MAP estimate did not converge after {iterations} iterations (gradient norm {grad_norm:.3e})")]
    NonConvergence {
        iterations: usize,
        grad_norm: f64,
        best: Vec<f64>,
    },

    /// Simulation requires a subcritical kernel.
    #[error("unstable kernel: branching ratio {0} >= 1")]
    UnstableKernel(f64),

    /// The background rate has no finite upper bound on the window.
    #[error("background rate is unbounded near t = {0}")]
    UnboundedBackground(f64),

    #[error("too few samples: need at least {need}, got {got}")]
    TooFewSamples { need: usize, got: usize },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
