use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A Cholesky pivot fell below `1e-12 * max diagonal`.
    NotPositiveDefinite { index: usize, pivot: f64 },
    /// Householder target is not a unit vector.
    NotUnitVector { norm: f64 },
    /// One-sided Jacobi SVD did not converge within the sweep limit.
    NoConvergence { sweeps: usize },
    OrderOutOfRange { order: usize },
    GridTooLarge { size: u128 },
    InvalidCorrelation { row: usize, col: usize, value: f64 },
    NonIncreasingTimes { index: usize },
    AllZeroWeights,
    DimensionMismatch { expected: usize, found: usize },
    InvalidInput(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::NotPositiveDefinite { index, pivot } => write!(
                f,
                "covariance matrix is not positive definite (pivot {index} = {pivot:e})"
            ),
            Error::NotUnitVector { norm } => {
                write!(f, "reflection target must be a unit vector (norm {norm})")
            }
            Error::NoConvergence { sweeps } => {
                write!(f, "SVD did not converge after {sweeps} sweeps")
            }
            Error::OrderOutOfRange { order } => {
                write!(f, "Gauss-Hermite order {order} outside 1..=64")
            }
            Error::GridTooLarge { size } => write!(f, "quadrature grid of {size} points exceeds 1e8"),
            Error::InvalidCorrelation { row, col, value } => {
                write!(f, "invalid correlation entry ({row}, {col}) = {value}")
            }
            Error::NonIncreasingTimes { index } => {
                write!(f, "observation times must be strictly increasing (index {index})")
            }
            Error::AllZeroWeights => f.write_str("all weights are zero"),
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::InvalidInput(msg) => f.write_str(msg),
        }
    }
}

impl core::error::Error for Error {}
