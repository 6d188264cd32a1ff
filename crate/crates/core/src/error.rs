use thiserror::Error;

/// Errors produced by the surrogate, optimization and device-model layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error(
        "kernel matrix is not positive definite after jitter {jitter:.3e} \
         (smallest eigenvalue estimate {min_eigenvalue:.3e})"
    )]
    Conditioning { jitter: f64, min_eigenvalue: f64 },

    #[error("linear solver did not converge: relative residual {residual:.3e} after {iterations} iterations")]
    Solver { residual: f64, iterations: usize },

    #[error("tolerance distribution leaves the trained domain in: {}", .parameters.join(", "))]
    Extrapolation { parameters: Vec<String> },

    #[error("invalid state: {0}")]
    State(String),

    #[error("training failed: {0}")]
    Training(String),

    #[error("sobol dimension {requested} exceeds the supported maximum of {supported}")]
    UnsupportedDimension { requested: usize, supported: usize },

    #[error("model file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
