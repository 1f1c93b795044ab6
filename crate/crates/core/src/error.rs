//! Error types shared across the crate.
//!
//! Every parser and kernel returns a structured error instead of panicking;
//! the CLI maps each variant class to a distinct exit code.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// File-level structural problems (wrong size, bad magic, out-of-range values).
    #[error("malformed file {path}: {reason}")]
    MalformedFile { path: PathBuf, reason: String },

    /// Record-level problems; `location` names the line or point index.
    #[error("parse error in {path} at {location}: {reason}")]
    Parse {
        path: PathBuf,
        location: String,
        reason: String,
    },

    #[error("missing field {field} in {path}")]
    MissingField { path: PathBuf, field: String },

    /// An argument or constructed value violates a documented invariant.
    #[error("validation failed: {0}")]
    Validation(String),

    /// A numeric input is outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The sampling strategy cannot produce a feasible region split.
    #[error("infeasible sampling strategy: {0}")]
    InfeasibleStrategy(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// A metric has no defined value for the given inputs (e.g. zero ground truths).
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    /// Synthetic scene generation could not place an object.
    #[error("placement failed: {0}")]
    Placement(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn malformed(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::MalformedFile {
            path: path.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn parse(
        path: impl Into<PathBuf>,
        location: impl Into<String>,
        reason: impl Into<String>,
    ) -> Self {
        Error::Parse {
            path: path.into(),
            location: location.into(),
            reason: reason.into(),
        }
    }
}
