use thiserror::Error;

/// Errors raised by the samplers, coupling machinery and diagnostics.
#[derive(Debug, Error)]
pub enum SomaError {
    /// A point lies outside the component space of a target or proposal.
    #[error("domain error: {0}")]
    Domain(String),

    /// A log-density evaluated to NaN or +inf on an in-support point.
    #[error("non-finite log-weight {value} at index {index}")]
    Numerical { index: usize, value: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("resource limit: {0}")]
    Resource(String),

    #[error("estimation failed: {0}")]
    Estimation(String),

    #[error("linear algebra failure: {0}")]
    LinearAlgebra(String),

    #[error("sinkhorn did not converge after {iterations} iterations (marginal violation {violation:e})")]
    NonConvergence { iterations: usize, violation: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = SomaError> = std::result::Result<T, E>;
