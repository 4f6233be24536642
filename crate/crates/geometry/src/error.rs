use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("set is empty")]
    EmptySet,
    #[error("set is unbounded")]
    Unbounded,
    #[error("set is not a C-set (compact with the origin in its interior)")]
    NotCSet,
    #[error("simplex failed to converge: {0}")]
    NumericalFailure(String),
    #[error("tolerances must all be positive")]
    InvalidTolerances,
    #[error("vertex enumeration exceeded {0} rays")]
    EnumerationOverflow(usize),
}
