use std::path::PathBuf;

use crate::grid::Field;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    /// One of the standing hypotheses on the kernel or the nonlinearity fails.
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    /// `F(1) = 0` exactly: the balanced case where beta would be 1.
    #[error("balanced nonlinearity (F(1) = 0): beta = {beta} sits on the boundary of the strict threshold hypothesis")]
    BalancedBoundary { beta: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("domain too small: {0}")]
    DomainTooSmall(String),

    #[error("time step {dt} exceeds the order-preserving bound {bound}")]
    StepSize { dt: f64, bound: f64 },

    /// The evolution produced a non-finite value; `last_valid` is the last clean state.
    #[error("non-finite value at step {step}")]
    NonFinite { step: usize, last_valid: Box<Field> },

    #[error("no root found: {0}")]
    RootNotFound(String),

    #[error("kernel transform diverges at lambda = {lambda}")]
    Divergence { lambda: f64 },

    #[error("solver failed after {iterations} iterations (residual history: {history:?})")]
    SolverFailure { iterations: usize, history: Vec<f64> },

    #[error("fit window unusable: {0}")]
    FitWindow(String),

    #[error("invalid bisection bracket: {0}")]
    Bracket(String),

    #[error("config error at line {line}: {message}")]
    ConfigParse { line: usize, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
