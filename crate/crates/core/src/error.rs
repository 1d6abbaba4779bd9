use thiserror::Error;

use crate::papir::IterationRecord;
use crate::sdp::SdpSolution;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// The interior-point solver stopped without reaching the requested gap.
    /// The best iterate found so far is attached.
    #[error("SDP solver did not converge after {iterations} iterations (relative gap {gap:.3e})")]
    SolverFailure {
        iterations: usize,
        gap: f64,
        best: Box<SdpSolution>,
    },

    #[error("estimation failed: {0}")]
    EstimationFailure(String),

    /// Every subarea probe of an iteration failed.
    #[error("localization failed at iteration {iteration}: {reason}")]
    AlgorithmFailure {
        iteration: usize,
        reason: String,
        history: Vec<IterationRecord>,
    },

    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    /// Short machine-readable tag, used by the CLI error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid_input",
            Error::DimensionMismatch(_) => "dimension_mismatch",
            Error::SolverFailure { .. } => "solver_failure",
            Error::EstimationFailure(_) => "estimation_failure",
            Error::AlgorithmFailure { .. } => "algorithm_failure",
            Error::Config { .. } => "config",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}
