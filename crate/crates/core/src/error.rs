use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("basis is singular (determinant is zero)")]
    SingularBasis,
    #[error("sublattice coefficient matrix is singular")]
    SingularCoefficients,
    #[error("sublattices do not share the same parent lattice")]
    ParentMismatch,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("enumeration budget exceeded: about {predicted} points predicted, cap is {cap}")]
    BudgetExceeded { predicted: u64, cap: u64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("covariance matrices are not ordered (min eigenvalue of the difference is {0:e})")]
    NotComparable(f64),
    #[error("arithmetic overflow: {0}")]
    Overflow(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
