use crate::resource::UserId;

/// Errors raised by the rational allocators and their input types.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AllocError {
    #[error("resource vector must have at least one component")]
    EmptyVector,
    #[error("dimension mismatch: expected {expected} components, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("user {0} has an all-zero demand vector")]
    ZeroDemand(UserId),
    #[error("demand has no positive component")]
    EmptyDemand,
    #[error("user {0} appears more than once")]
    DuplicateUser(UserId),
    #[error("reserve of resource {resource} is zero")]
    ZeroReserve { resource: usize },
    #[error("weight {index} is not strictly positive")]
    NonPositiveWeight { index: usize },
    #[error("expected {expected} weights, found {found}")]
    WeightCountMismatch { expected: usize, found: usize },
    #[error("negative value {0} rejected")]
    Negative(String),
    #[error("zero denominator")]
    ZeroDenominator,
    #[error("malformed rational `{0}`")]
    Parse(String),
    #[error("arithmetic overflow")]
    Overflow,
}
