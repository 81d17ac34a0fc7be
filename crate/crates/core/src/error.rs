use thiserror::Error;

/// Errors raised by the hypercube sampling library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("dimension {dim} exceeds the cap of {cap} for {what}")]
    CapExceeded {
        what: &'static str,
        dim: usize,
        cap: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("noise level alpha = 0 has no informative posterior; use the prior mean")]
    ZeroNoise,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{what} did not converge within {iterations} iterations")]
    NotConverged {
        what: &'static str,
        iterations: usize,
    },

    #[error("unbalanced masses: total difference {0:e}")]
    Unbalanced(f64),

    #[error("training diverged at epoch {epoch}")]
    Divergence { epoch: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn ensure_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

pub(crate) fn ensure_cap(what: &'static str, dim: usize, cap: usize) -> Result<()> {
    if dim > cap {
        return Err(Error::CapExceeded { what, dim, cap });
    }
    Ok(())
}
