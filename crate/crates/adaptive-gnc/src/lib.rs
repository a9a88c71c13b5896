//! Robust nonlinear least squares with adaptive loss functions and
//! graduated nonconvexity (GNC).
//!
//! The crate is organized in layers:
//!
//! - [`loss`]: adaptive and classical robust kernels, IRLS weights.
//! - [`adaptive`]: distribution-level fitting — truncated partition
//!   function, shape-parameter grid search, Maxwell-Boltzmann mode fit.
//! - [`gnc`]: shape functions, outlier processes, and the graduated
//!   nonconvexity driver (plain adaptive and mode-shifted variants, plus
//!   Geman-McClure and truncated-least-squares baselines).
//! - [`solver`]: weighted linear least squares, the IRLS loop, and
//!   Gauss-Newton over SE(3).
//! - [`geometry`]: SE(3) Lie operations, point clouds, nearest-neighbor
//!   search, normal estimation, and an ICP pipeline.
//! - [`stats`]: chi-square quantiles and sampling helpers.

pub mod adaptive;
pub mod gnc;
pub mod geometry;
pub mod loss;
pub mod solver;
pub mod stats;

pub use loss::{Alpha, Kernel};
