use thiserror::Error;

/// Errors raised by the numerical kernels, the loss and the trainer.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("degenerate gradient: kappa tilde {0:e} is at the antipodal singularity")]
    DegenerateGradient(f64),

    #[error("similarity for pair {index} failed: {source}")]
    Pair {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("grid cell (kappa_i={kappa_i}, kappa_j={kappa_j}, cos_theta={cos_theta}): {source}")]
    GridCell {
        kappa_i: f64,
        kappa_j: f64,
        cos_theta: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("training diverged at step {step}: loss {loss} exceeds 10x the initial loss {initial}")]
    Diverged { step: usize, loss: f64, initial: f64 },

    #[error("invalid config: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
