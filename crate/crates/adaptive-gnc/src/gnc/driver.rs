//! The outer GNC loop: sweep the surrogate shape, alternate weight updates
//! with weighted solves, and log every stage.

use super::shape::{shape_fn, GncSchedule};
use super::weights::{gnc_weight, weight_gnc_gm, weight_gnc_tls};
use super::GncError;
use crate::adaptive::{
    estimate_density, fit_mb, select_alpha, select_alpha_modeshifted, AlphaSearchConfig, MbFit,
    ResidualSet,
};
use crate::loss::Alpha;
use crate::solver::{SolveError, WeightedLsProblem};
use nalgebra::DVector;

/// Anything GNC can drive: it must expose its current Mahalanobis
/// residuals and solve the weighted subproblem from the current state.
pub trait GncProblem {
    type State: Clone;

    fn residuals(&self, state: &Self::State) -> Vec<f64>;

    fn solve_weighted(
        &self,
        weights: &[f64],
        current: &Self::State,
    ) -> Result<Self::State, SolveError>;
}

impl GncProblem for WeightedLsProblem {
    type State = DVector<f64>;

    fn residuals(&self, state: &Self::State) -> Vec<f64> {
        WeightedLsProblem::residuals(self, state)
    }

    fn solve_weighted(
        &self,
        weights: &[f64],
        _current: &Self::State,
    ) -> Result<Self::State, SolveError> {
        self.solve(weights)
    }
}

/// Per-stage weight rule.
#[derive(Debug, Clone, Copy)]
pub enum GncRule {
    /// Adaptive surrogate driven toward a fixed target shape.
    Agnc { alpha_star: Alpha },
    /// Mode-shifted adaptive surrogate: residuals at or below the mode are
    /// exact inliers at every stage.
    GncAmb { alpha_star: Alpha, mode: f64 },
    /// Geman-McClure surrogate, recovered at mu = 1.
    GncGm { scale: f64 },
    /// Truncated least squares, converged once the weights are binary.
    GncTls { threshold: f64 },
}

/// What kind of control loop a rule needs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageKind {
    ShapeDriven,
    GemanMcClure,
    TruncatedLs,
}

impl GncRule {
    fn kind(&self) -> StageKind {
        match self {
            GncRule::Agnc { .. } | GncRule::GncAmb { .. } => StageKind::ShapeDriven,
            GncRule::GncGm { .. } => StageKind::GemanMcClure,
            GncRule::GncTls { .. } => StageKind::TruncatedLs,
        }
    }
}

/// One row of the stage log.
#[derive(Debug, Clone, Copy)]
pub struct GncStage {
    pub stage: usize,
    pub mu: f64,
    /// Effective shape value; only meaningful for the shape-driven rules.
    pub f: Option<f64>,
    /// Weighted least-squares objective after the stage's solve.
    pub objective: f64,
    /// Number of weights above 1/2.
    pub inlier_count: usize,
}

#[derive(Debug, Clone)]
pub struct GncOutcome<S> {
    pub state: S,
    pub weights: Vec<f64>,
    pub stages: Vec<GncStage>,
    /// False when the stage cap ran out before the termination rule fired.
    pub converged: bool,
}

fn stage_record(
    stage: usize,
    mu: f64,
    f: Option<f64>,
    weights: &[f64],
    eps: &[f64],
) -> Result<GncStage, GncError> {
    let objective: f64 = weights
        .iter()
        .zip(eps)
        .map(|(w, e)| 0.5 * w * e * e)
        .sum();
    if !objective.is_finite() {
        return Err(GncError::Diverged { stage });
    }
    Ok(GncStage {
        stage,
        mu,
        f,
        objective,
        inlier_count: weights.iter().filter(|w| **w > 0.5).count(),
    })
}

/// Run graduated nonconvexity from an initial state.
///
/// Each stage computes the current surrogate weights, solves the weighted
/// problem once, and advances the control parameter; the loop ends when the
/// rule's termination condition fires (shape recovered, mu schedule done,
/// or weights binary) or when `schedule.max_stages` runs out.
pub fn run_gnc<P: GncProblem>(
    problem: &P,
    init: P::State,
    rule: GncRule,
    schedule: &GncSchedule,
) -> Result<GncOutcome<P::State>, GncError> {
    let mut state = init;
    let mut eps = problem.residuals(&state);
    let mut stages = Vec::new();
    let mut weights = vec![1.0; eps.len()];
    let mut converged = false;

    let max_eps_sq = eps.iter().fold(0.0_f64, |m, e| m.max(e * e));
    let mut mu = match rule {
        GncRule::Agnc { alpha_star } | GncRule::GncAmb { alpha_star, .. } => {
            schedule.initial_mu(alpha_star)
        }
        // Classical GNC initializations: start fully convex given the
        // worst residual currently in play.
        GncRule::GncGm { scale } => (2.0 * max_eps_sq / (scale * scale)).max(1.0),
        GncRule::GncTls { threshold } => {
            let c2 = threshold * threshold;
            let denom = 2.0 * max_eps_sq - c2;
            if denom <= 0.0 {
                // Every residual is already well inside the truncation
                // radius; weights are binary immediately.
                1e6
            } else {
                (c2 / denom).max(1e-6)
            }
        }
    };

    for stage in 0..schedule.max_stages {
        let f = match rule {
            GncRule::Agnc { alpha_star } | GncRule::GncAmb { alpha_star, .. } => {
                Some(shape_fn(schedule.variant, mu, alpha_star)?)
            }
            _ => None,
        };
        weights = match rule {
            GncRule::Agnc { .. } => {
                let f = f.unwrap();
                eps.iter().map(|&e| gnc_weight(e, f)).collect()
            }
            GncRule::GncAmb { mode, .. } => {
                let f = f.unwrap();
                eps.iter()
                    .map(|&e| if e <= mode { 1.0 } else { gnc_weight(e - mode, f) })
                    .collect()
            }
            GncRule::GncGm { scale } => {
                eps.iter().map(|&e| weight_gnc_gm(e, mu, scale)).collect()
            }
            GncRule::GncTls { threshold } => eps
                .iter()
                .map(|&e| weight_gnc_tls(e, mu, threshold))
                .collect(),
        };

        state = problem
            .solve_weighted(&weights, &state)
            .map_err(|source| GncError::SolveFailed { stage, mu, source })?;
        eps = problem.residuals(&state);
        stages.push(stage_record(stage, mu, f, &weights, &eps)?);

        let terminal = match rule.kind() {
            StageKind::ShapeDriven => {
                let alpha_star = match rule {
                    GncRule::Agnc { alpha_star } | GncRule::GncAmb { alpha_star, .. } => alpha_star,
                    _ => unreachable!(),
                };
                schedule.is_terminal(f.unwrap(), alpha_star)
            }
            StageKind::GemanMcClure => mu <= 1.0,
            StageKind::TruncatedLs => weights.iter().all(|&w| w == 0.0 || w == 1.0),
        };
        if terminal {
            converged = true;
            break;
        }

        mu = match rule.kind() {
            StageKind::ShapeDriven => {
                let alpha_star = match rule {
                    GncRule::Agnc { alpha_star } | GncRule::GncAmb { alpha_star, .. } => alpha_star,
                    _ => unreachable!(),
                };
                schedule.next_mu(mu, alpha_star)
            }
            StageKind::GemanMcClure => (mu / schedule.update_factor).max(1.0),
            StageKind::TruncatedLs => mu * schedule.update_factor,
        };
    }

    Ok(GncOutcome {
        state,
        weights,
        stages,
        converged,
    })
}

/// Adaptive GNC: fit the target shape once from the initial residual
/// distribution, then run the sweep.
pub fn agnc_pipeline<P: GncProblem>(
    problem: &P,
    init: P::State,
    cfg: &AlphaSearchConfig,
    schedule: &GncSchedule,
) -> Result<(GncOutcome<P::State>, Alpha), GncError> {
    let eps = problem.residuals(&init);
    let rs = ResidualSet::new(eps, 1)?;
    let alpha_star = select_alpha(&rs, cfg)?;
    let outcome = run_gnc(problem, init, GncRule::Agnc { alpha_star }, schedule)?;
    Ok((outcome, alpha_star))
}

#[derive(Debug, Clone)]
pub struct AmbPipelineConfig {
    pub n_e: u32,
    pub bins: usize,
    pub alpha: AlphaSearchConfig,
    pub schedule: GncSchedule,
}

impl AmbPipelineConfig {
    pub fn new(n_e: u32) -> Self {
        AmbPipelineConfig {
            n_e,
            bins: 100,
            alpha: AlphaSearchConfig::default(),
            schedule: GncSchedule::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct AmbPipelineOutcome<S> {
    pub outcome: GncOutcome<S>,
    pub mb: MbFit,
    pub alpha_star: Alpha,
    /// Set when no residual exceeded the fitted mode, in which case the
    /// sweep degenerates to a single quadratic solve.
    pub degenerate_shift: bool,
}

/// Mode-aware GNC: fit the Maxwell-Boltzmann mode and the mode-shifted
/// target shape from the initial residual distribution, then sweep with
/// the mode-shifted rule.
pub fn gnc_amb_pipeline<P: GncProblem>(
    problem: &P,
    init: P::State,
    cfg: &AmbPipelineConfig,
) -> Result<AmbPipelineOutcome<P::State>, GncError> {
    let eps = problem.residuals(&init);
    let rs = ResidualSet::new(eps, cfg.n_e)?;
    let q = estimate_density(&rs, cfg.bins)?;
    let mb = fit_mb(&q, cfg.n_e, cfg.alpha.tau)?;
    let sel = select_alpha_modeshifted(&rs, mb.mode, &cfg.alpha)?;
    let outcome = run_gnc(
        problem,
        init,
        GncRule::GncAmb {
            alpha_star: sel.alpha,
            mode: mb.mode,
        },
        &cfg.schedule,
    )?;
    Ok(AmbPipelineOutcome {
        outcome,
        mb,
        alpha_star: sel.alpha,
        degenerate_shift: sel.degenerate,
    })
}
