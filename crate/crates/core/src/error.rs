use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the netlds library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument `{arg}`: {reason}")]
    InvalidArgument { arg: &'static str, reason: String },

    #[error("model is not stationary: spectral radius {radius:.9} must be below {limit:.9}")]
    Unstable { radius: f64, limit: f64 },

    #[error("model support does not match graph: {0}")]
    SupportMismatch(String),

    #[error("ill-posed model at frequency {frequency}: (I - H) is singular")]
    IllPosed { frequency: f64 },

    #[error("matrix is singular or not positive definite: {0}")]
    Singular(String),

    #[error("Lyapunov iteration did not converge (residual {residual:e})")]
    LyapunovDivergence { residual: f64 },

    #[error("node {node} has an identically zero spectral column")]
    ZeroColumn { node: usize },

    #[error("design contains non-finite values")]
    NonFinite,

    #[error("solver did not converge after {iterations} iterations (KKT residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("missing Wiener estimate for node {0}")]
    MissingEstimate(usize),

    #[error("degenerate model: true edge ({i}, {j}) has zero imaginary Wiener coefficient")]
    DegenerateSeparation { i: usize, j: usize },

    #[error("theorem constraint violated: {0}")]
    Constraint(String),

    #[error("corrupt batch file: {0}")]
    CorruptBatch(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(arg: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            arg,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
