use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: expected {expected}, got {actual}")]
    ShapeMismatch {
        op: &'static str,
        expected: String,
        actual: String,
    },

    #[error("layer {layer}: expected input {expected}, got {actual}")]
    LayerShape {
        layer: usize,
        expected: String,
        actual: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {message}")]
    Format { context: String, message: String },

    #[error("{context}: line {line}: {message}")]
    Parse {
        context: String,
        line: usize,
        message: String,
    },

    #[error("not a weights file")]
    NotWeightsFile,

    #[error("weights file configuration {found} does not match model configuration {expected}")]
    WeightsConfigMismatch { expected: String, found: String },

    #[error("weights file truncated in layer {layer}: expected {expected} bytes, found {actual}")]
    TruncatedWeights {
        layer: usize,
        expected: usize,
        actual: usize,
    },

    #[error("detections reference unknown image ids: {}", .0.join(", "))]
    UnknownImages(Vec<String>),

    #[error("unknown class id {0}")]
    UnknownClass(usize),

    #[error("training diverged: non-finite loss in epoch {epoch}")]
    Diverged { epoch: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("degenerate: no nonzero pairs")]
    Degenerate,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Format {
            context: context.into(),
            message: message.into(),
        }
    }

    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidArgument(message.into())
    }

    /// True for failures of the numerics (divergence, degenerate statistics)
    /// rather than of inputs or I/O.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Diverged { .. } | Error::NonFinite(_) | Error::Degenerate
        )
    }
}
