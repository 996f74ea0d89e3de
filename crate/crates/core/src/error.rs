use std::path::PathBuf;

/// Errors produced by the detection toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: u64, message: String },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{model} did not converge after {iterations} iterations (best criterion {best_criterion:.3e})")]
    Convergence { model: &'static str, iterations: usize, best_criterion: f64 },

    #[error("unsupported model file schema version {found} (expected {expected})")]
    SchemaVersion { found: u32, expected: u32 },

    #[error("unsupported model: {0}")]
    UnsupportedModel(String),

    #[error("feature order mismatch: model expects {expected:?}, got {found:?}")]
    FeatureOrder { expected: Vec<String>, found: Vec<String> },

    #[error("window at {participant_id}/{window_start} rejected: {reason}")]
    WindowRejected { participant_id: String, window_start: i64, reason: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: u64, message: impl Into<String>) -> Self {
        Error::Parse { path: path.into(), line, message: message.into() }
    }

    /// True for errors caused by bad input data rather than configuration.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}
