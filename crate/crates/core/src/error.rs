use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("rank mismatch: expected {expected}, got {got}")]
    RankMismatch { expected: usize, got: usize },

    #[error("eigensolver failed: {0}")]
    Eigen(String),

    #[error("spectral basis captures only {captured:.3e} of the field mass (need {required:.3e})")]
    Truncation { captured: f64, required: f64 },

    #[error("incompatible spaces: {0}")]
    SpaceMismatch(String),

    #[error("{0}")]
    Solve(#[from] SolveError),

    #[error("undefined: {0}")]
    Undefined(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse: {0}")]
    Parse(String),
}

/// Failure classes of the bound-state solver.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("non-convergence: {0}")]
    NonConvergence(String),
    #[error("trivial-solution: iteration converged to u = 0 (|u|_2 = {0:.3e})")]
    TrivialSolution(f64),
    #[error("window-too-small: {0}")]
    WindowTooSmall(String),
    #[error("spectral-resonance: {0}")]
    Resonance(String),
}

impl SolveError {
    pub fn class(&self) -> &'static str {
        match self {
            SolveError::NonConvergence(_) => "non-convergence",
            SolveError::TrivialSolution(_) => "trivial-solution",
            SolveError::WindowTooSmall(_) => "window-too-small",
            SolveError::Resonance(_) => "spectral-resonance",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
