use thiserror::Error;

/// Errors produced by basis construction, operator algebra and flow machinery.
#[derive(Debug, Error)]
pub enum Error {
    #[error("operands live over different bases")]
    BasisMismatch,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("degree constraint violated: {0}")]
    DegreeViolation(String),
    #[error("matrix is not invertible")]
    NotInvertible,
    #[error("symplectic matrix failed validation: {0}")]
    InvalidOmega(String),
    #[error("deformer is not antisymmetric under the symplectic transpose")]
    NotAntisymmetric,
    #[error("exact-mode matrix exponential requires a nilpotent argument")]
    NotNilpotent,
    #[error("matrix exponential requires a degree 0 endomorphism, got degree {0}")]
    ExpNonzeroDegree(i32),
    #[error("flow grid needs at least {needed} points, got {got}")]
    GridTooSmall { needed: usize, got: usize },
    #[error("result was truncated at polynomial degree {0} where an exact value is required")]
    TruncationDisallowed(usize),
    #[error("cannot parse scalar literal `{0}`")]
    Parse(String),
    #[error("search budget exhausted: {0}")]
    SearchExhausted(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
