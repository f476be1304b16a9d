use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("precision of {0} digits is below the minimum of 30")]
    InvalidPrecision(u32),
    #[error("singular matrix: pivot in column {column} is negligible")]
    SingularMatrix { column: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("root finder did not converge after {iterations} sweeps ({unconverged} roots pending)")]
    NoConvergence { iterations: usize, unconverged: usize },
    #[error("unsupported argument: {0}")]
    UnsupportedArgument(String),
    #[error("degenerate schedule: {0}")]
    DegenerateSchedule(String),
    #[error("cannot match eigencomponent scales: both derivatives at r_1^2 vanish")]
    ScalingDegenerate,
    #[error("internal inconsistency: {0}")]
    InternalInconsistency(String),
    #[error("lattice sum did not decay below the cutoff within {shells} shells")]
    NoDecay { shells: usize },
    #[error("argument out of range: {0}")]
    OutOfRange(String),
    #[error("no closed form for this case: {0}")]
    OutOfScope(String),
    #[error("nullspace has dimension greater than one")]
    DegenerateNullspace,
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
