//! Inner solvers: weighted linear least squares, the IRLS loop, and
//! Gauss-Newton over SE(3).

mod gauss_newton;
mod irls;
mod linear;

pub use gauss_newton::{gauss_newton_se3, GaussNewtonOptions};
pub use irls::{irls, IrlsOptions, SolverReport, WeightPolicy};
pub use linear::{LsBlock, WeightedLsProblem};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("block {index}: inconsistent dimensions (A is {rows}x{cols}, y has {y_len})")]
    DimensionMismatch {
        index: usize,
        rows: usize,
        cols: usize,
        y_len: usize,
    },
    #[error("block {index}: error covariance is not symmetric positive definite")]
    CovarianceNotSpd { index: usize },
    #[error("weight vector has {got} entries, problem has {expected} blocks")]
    WeightCountMismatch { got: usize, expected: usize },
    #[error("weights must be finite and nonnegative")]
    InvalidWeights,
    #[error("normal equations are rank deficient; null direction approximately {null_direction:?}")]
    RankDeficient { null_direction: Vec<f64> },
    #[error("distribution refit inside IRLS failed: {0}")]
    AdaptiveRefit(#[from] crate::adaptive::FitError),
}
