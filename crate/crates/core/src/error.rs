use std::fmt;
use std::path::PathBuf;

use crate::qp::SolveDiagnostics;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A documented precondition on the inputs does not hold.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("query at t = {t} is outside the valid range starting at {start}")]
    OutOfDomain { t: f64, start: f64 },

    #[error("waypoint {waypoint} m lies beyond the end of the lead trace ({trace_end} m)")]
    HorizonExceedsTrace { waypoint: f64, trace_end: f64 },

    #[error("infeasible {layer} problem ({diagnostics})")]
    Infeasible {
        layer: Layer,
        diagnostics: SolveDiagnostics,
    },

    #[error("{layer} solve did not converge ({diagnostics})")]
    Degraded {
        layer: Layer,
        diagnostics: SolveDiagnostics,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("invalid value for `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error("{}: not found", .0.display())]
    NotFound(PathBuf),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layer {
    Planning,
    Tracking,
}

impl fmt::Display for Layer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Layer::Planning => f.write_str("planning"),
            Layer::Tracking => f.write_str("tracking"),
        }
    }
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        if source.kind() == std::io::ErrorKind::NotFound {
            return Error::NotFound(path.as_ref().to_path_buf());
        }
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// True for errors caused by bad user input (files, configs, parameters).
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. } | Error::Validation { .. } | Error::NotFound(_) | Error::Io { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
