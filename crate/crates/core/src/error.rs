use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the models, fits and file interfaces.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    /// Loop flux too close to half a flux quantum, where the Josephson
    /// inductance diverges.
    #[error(
        "Josephson inductance singularity: loop flux {loop_flux:.6} Φ₀ is within {clamp} Φ₀ of the half-flux divergence"
    )]
    Singularity { loop_flux: f64, clamp: f64 },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:.3e})")]
    Convergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("numeric error: {0}")]
    Numeric(String),

    /// The data do not carry the feature a fit model needs.
    #[error("fit rejected: {0}")]
    FitRejected(String),

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }
}
