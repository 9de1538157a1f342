use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("site {site} out of range for a model with {n_sites} sites")]
    SiteOutOfRange { site: usize, n_sites: usize },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unsupported range [{a}, {b}]: the lower end must be positive")]
    UnsupportedRange { a: f64, b: f64 },

    #[error("trace length must be at least 1")]
    EmptyTrace,

    #[error("oracle unavailable: {states} states exceed the cap of {cap}")]
    OracleUnavailable { states: u128, cap: u64 },

    #[error("chain bounds unavailable: {0}")]
    BoundsUnavailable(String),

    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to parse {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Stdio(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
