use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("diagonal entry {index} is {value:e}, not above the floor {floor:e}")]
    DiagonalUnderflow { index: usize, value: f64, floor: f64 },

    #[error("normalized correlation at ({row}, {col}) has magnitude {value} > 1")]
    NormalizationOverflow { row: usize, col: usize, value: f64 },

    #[error("arcsine-law covariance is singular (condition number {condition:e})")]
    SingularArcsineMatrix { condition: f64 },

    #[error("channel Gram matrix is singular (condition number {condition:e})")]
    SingularGram { condition: f64 },

    #[error("cannot estimate a covariance from zero samples")]
    EmptyBatch,

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("coefficient {index} is negative ({value})")]
    NegativeCoefficient { index: usize, value: f64 },

    #[error("dither scale must be positive, got {0}")]
    InvalidLambda(f64),

    #[error("matrix is not Hermitian: |A - A^H| = {deviation:e}")]
    NotHermitian { deviation: f64 },

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("user {user} has a zero interference-plus-noise power")]
    ZeroDenominator { user: usize },

    #[error("eigendecomposition did not converge")]
    EigenFailure,
}
