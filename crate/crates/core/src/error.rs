use std::path::PathBuf;

use crate::pipeline::StageDiagnostics;

/// Errors produced by the fitting and evaluation library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A parameter, dimension or configuration value is out of contract.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Input geometry is too degenerate to define a transform.
    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    /// A function value or gradient became non-finite.
    #[error("non-finite value: {0}")]
    Numeric(String),

    /// Every keypoint was masked out of an objective.
    #[error("objective has no valid keypoints")]
    EmptyObjective,

    /// No valid (frame, keypoint) pair was available to a metric.
    #[error("no valid keypoints to evaluate")]
    EmptyEvaluation,

    /// A text or JSON input was malformed.
    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    /// A fitting stage failed; carries diagnostics of the stages that ran.
    #[error("fit failed in stage {stage}: {source}")]
    Fit {
        stage: usize,
        diagnostics: Vec<StageDiagnostics>,
        #[source]
        source: Box<Error>,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
