use std::path::PathBuf;

use thiserror::Error;

use crate::world::Role;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point ({x}, {y}) lies outside the arena")]
    OutOfBounds { x: f64, y: f64 },

    #[error("could not place {what} after {attempts} attempts")]
    Placement { what: &'static str, attempts: usize },

    #[error("genome has {got} weights, topology needs {expected}")]
    Dimension { expected: usize, got: usize },

    #[error("genome weight {index} is not finite")]
    NonFinite { index: usize },

    #[error("invalid config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("role mismatch: expected a {expected} genome, got {found}")]
    RoleMismatch { expected: Role, found: Role },

    #[error("pairing {pairing} takes {expected} genome(s), got {got}")]
    GenomeCount {
        pairing: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
