use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Caller supplied malformed or out-of-domain input.
    #[error("invalid input: {0}")]
    Input(String),

    /// A numerical routine broke down (e.g. a matrix that is not positive definite).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The reweighting loop of the capped critic did not stabilise.
    #[error("critic did not converge after {iterations} iterations")]
    Convergence {
        iterations: usize,
        objective_trace: Vec<f64>,
    },

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error on {}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn input(msg: impl Into<String>) -> Error {
    Error::Input(msg.into())
}
