use std::path::PathBuf;

use thiserror::Error;

use crate::solver::State;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("field length {found} does not match grid size {expected}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("argument {value} outside admissible range: {reason}")]
    OutOfRange { value: f64, reason: String },

    #[error("invalid nonlinearity: {0}")]
    InvalidNonlinearity(String),

    #[error("quadrature did not converge on [{a}, {b}]")]
    Quadrature { a: f64, b: f64 },

    /// A hypothesis on the model parameters is violated. The message names it.
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("invalid initial data: {0}")]
    InitialData(String),

    #[error("singular tridiagonal system at row {row}")]
    Singular { row: usize },

    /// The solver could not continue. The last accepted state is kept for post-mortem.
    #[error("solver failure at t = {}: {reason}", state.t)]
    Solver { reason: String, state: Box<State> },

    #[error("analysis precondition failed: {0}")]
    Analysis(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn out_of_range(value: f64, reason: impl Into<String>) -> Self {
        Error::OutOfRange {
            value,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
