//! Error type shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration or arguments (bad tuning ranges, fold counts, ...).
    #[error("config error: {0}")]
    Config(String),

    /// Problems with input data: files, schemas, malformed cells, shape
    /// mismatches discovered at ingestion.
    #[error("data error: {0}")]
    Data(String),

    /// Numerical failure inside an estimator.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Coordinate descent did not reach the KKT tolerance.
    #[error("lasso did not converge after {iterations} iterations (kkt violation {kkt_violation:.3e})")]
    NonConvergence {
        iterations: usize,
        kkt_violation: f64,
    },

    /// Residualizing a subgroup column produced a degenerate projection.
    #[error("degenerate nodewise projection for subgroup column {column}: V_j'Z_j = {inner_product:.3e}")]
    DegenerateProjection { column: usize, inner_product: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}
