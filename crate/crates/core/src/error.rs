use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the simulator.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the model (negative distance,
    /// non-positive frequency, PA outside the waveguide, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Two points that enter a `1/r` term coincide.
    #[error("singular geometry: {0}")]
    Singularity(String),

    /// Input arrays disagree in length or shape.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A numerical routine produced or received non-finite values.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Invalid scenario configuration; the message names the offending field.
    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error on {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("json error on {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
