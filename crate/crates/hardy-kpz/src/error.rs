//! Crate-wide error type.

use thiserror::Error;

/// Errors raised by the library and mapped to CLI exit codes.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter lies outside the analytic domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A configuration value is malformed or inconsistent.
    #[error("configuration error: {0}")]
    Config(String),
    /// Operator assembly failed (for instance, angular quadrature did not converge).
    #[error("assembly error: {0}")]
    Assembly(String),
    /// Arguments are individually valid but do not fit together (grid mismatch).
    #[error("usage error: {0}")]
    Usage(String),
    /// A supersolution could not be constructed for admissible-looking input.
    #[error("construction failure: {0}")]
    Construction(String),
    /// Iterates became NaN or infinite.
    #[error("numerical divergence: {0}")]
    NumericalDivergence(String),
    /// Linear algebra or other internal failure.
    #[error("internal error: {0}")]
    Internal(String),
    /// Filesystem failure while writing or reading artifacts.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    /// JSON (de)serialization failure.
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Wraps an I/O error with the path it concerns.
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

/// Returns a domain error unless `cond` holds.
pub(crate) fn ensure_domain(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Domain(msg()))
    }
}
