use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the solver library and the benchmark harness.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller broke an operation precondition (dimensions, signs, finiteness).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    /// The shifted matrix `H + lambda I` has a zero pivot.
    #[error("shifted matrix is singular at lambda = {lambda}")]
    SingularShift { lambda: f64 },

    #[error("rational Krylov shift {shift} could not be factorized")]
    ShiftFailure { shift: f64 },

    #[error("Krylov basis is full (capacity {capacity})")]
    Capacity { capacity: usize },

    #[error("reduced secular solve failed: {0}")]
    ReducedSolve(String),

    #[error("full-space secular solve failed: {0}")]
    FullSolve(String),

    #[error("eigensolver did not converge: {0}")]
    EigFailure(String),

    /// An algorithmic invariant that the theory guarantees was found broken.
    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error("unknown problem `{0}`")]
    UnknownProblem(String),

    #[error("unknown solver `{0}`")]
    UnknownSolver(String),

    #[error("problem {name} does not accept n = {n}: {reason}")]
    ProblemDimension { name: String, n: usize, reason: String },

    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error("no samples in {0}")]
    EmptyData(PathBuf),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("performance profile: {0}")]
    Profile(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { expected, got })
    }
}
