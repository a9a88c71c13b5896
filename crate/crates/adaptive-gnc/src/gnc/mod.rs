//! Graduated nonconvexity machinery.
//!
//! A GNC run sweeps the effective shape of the adaptive loss from the
//! quadratic value 2 down to a target `alpha*` through a shape function
//! `f(mu, alpha*)`, alternating weight updates and weighted solves at each
//! stage. Two shape-function variants are provided (one with increasing and
//! one with decreasing control parameter), along with the closed-form
//! outlier process of the surrogate loss and the classical Geman-McClure /
//! truncated-least-squares GNC baselines.

mod driver;
mod shape;
mod weights;

pub use driver::{
    run_gnc, AmbPipelineOutcome, GncOutcome, GncProblem, GncRule, GncStage, StageKind,
};
pub use driver::{agnc_pipeline, gnc_amb_pipeline, AmbPipelineConfig};
pub use shape::{shape_fn, GncSchedule, ShapeFunction};
pub use weights::{gnc_weight, outlier_process_agnc, weight_gnc_gm, weight_gnc_tls};

use crate::adaptive::FitError;
use crate::solver::SolveError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GncError {
    #[error("control parameter {mu} outside the domain of {variant:?}")]
    MuOutOfDomain {
        variant: shape::ShapeFunction,
        mu: f64,
    },
    #[error("inner solve failed at GNC stage {stage} (mu = {mu}): {source}")]
    SolveFailed {
        stage: usize,
        mu: f64,
        #[source]
        source: SolveError,
    },
    #[error("objective became non-finite at GNC stage {stage}; the schedule diverged")]
    Diverged { stage: usize },
    #[error("distribution fit failed: {0}")]
    Fit(#[from] FitError),
}
