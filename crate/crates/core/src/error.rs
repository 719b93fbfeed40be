use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: String, found: String },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("argument outside domain: {0}")]
    Domain(String),

    #[error("mode error: {0}")]
    Mode(String),

    #[error(
        "instability at t = {time:.6e} (step {step}): layer {layer}, cell {cell} has value {value:.6e}"
    )]
    Instability {
        time: f64,
        step: usize,
        layer: usize,
        cell: usize,
        value: f64,
    },

    #[error("support reached the domain boundary at t = {time:.6e} (step {step}, boundary density {density:.3e})")]
    BoundaryContact { time: f64, step: usize, density: f64 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("config error in {path}: {message}")]
    Config { path: PathBuf, message: String },

    #[error("validation failed:\n  - {}", .0.join("\n  - "))]
    Validation(Vec<String>),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub(crate) fn dims(expected: impl ToString, found: impl ToString) -> Self {
        Error::Dimension {
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }

    /// True for errors raised while integrating (as opposed to bad input).
    pub fn is_runtime(&self) -> bool {
        matches!(
            self,
            Error::Instability { .. } | Error::BoundaryContact { .. } | Error::Io { .. } | Error::Csv { .. }
        )
    }
}
