use std::path::PathBuf;

use thiserror::Error;

use crate::model::JointId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("non-finite input: {0}")]
    NonFinite(&'static str),

    #[error("missing joint {0}")]
    MissingJoint(JointId),

    #[error("unknown block index {0}")]
    UnknownBlock(usize),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("bounds {start}..{end} outside series of length {len}")]
    BoundsOutOfRange { start: usize, end: usize, len: usize },

    #[error("baseline must be positive, got {0}")]
    UndefinedBaseline(f64),

    #[error("fewer than two heel strikes: no strides")]
    NoStrides,

    #[error("filter corner {corner_hz} Hz must lie strictly between 0 and Nyquist ({nyquist_hz} Hz)")]
    CornerAboveNyquist { corner_hz: f64, nyquist_hz: f64 },

    #[error("simulation diverged at tick {tick}: {detail}")]
    Diverged { tick: usize, detail: String },

    #[error("config error{}: {message}", .line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Config { line: Option<usize>, message: String },

    #[error("{path}: row {row}: {message}")]
    Malformed { path: PathBuf, row: usize, message: String },

    #[error("{0}")]
    Validation(String),

    #[error("io error on {path}: {source}")]
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

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line tool: 3 for a runtime
    /// divergence, 2 for everything that is a validation problem.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Diverged { .. } => 3,
            _ => 2,
        }
    }
}
