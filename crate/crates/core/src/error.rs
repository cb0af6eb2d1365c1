use thiserror::Error;

/// Errors raised by the optimizer and its building blocks.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum PgdError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite entry at index {index}")]
    NonFinite { index: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("singular multiplier system: active constraints are linearly dependent (pivot {pivot:e})")]
    SingularSystem { pivot: f64 },

    #[error("active-set iteration limit of {limit} exceeded")]
    IterationLimit { limit: usize },

    #[error("step relaxation applied more than {limit} times")]
    RelaxationLimit { limit: usize },

    #[error("gradient is identically zero at the first iteration")]
    ZeroGradient,

    #[error("problem is infeasible: {0}")]
    InfeasibleProblem(String),

    #[error("too many constraints for exhaustive enumeration: {count} > {limit}")]
    TooManyConstraints { count: usize, limit: usize },

    #[error("evaluation failed: {0}")]
    Evaluation(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("linear solver failed: {0}")]
    Solver(String),
}

pub type Result<T> = std::result::Result<T, PgdError>;
