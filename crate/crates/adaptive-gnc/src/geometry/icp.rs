//! Point-cloud alignment: nearest-neighbor association, point-to-point
//! Mahalanobis residuals for distribution fitting, point-to-plane
//! Gauss-Newton solves, and the per-method weighting strategies.
//!
//! The fixed cloud `P` carries the normals; each of its points is
//! associated to the nearest point of the moving cloud `Q` under the
//! current pose. Weights always come from the point-to-point residual
//! distribution (so association distance drives outlier rejection), while
//! the state update minimizes the weighted point-to-plane error.

use super::{se3_exp, se3_log, GeomError, KdTree, PointCloud, Pose};
use crate::adaptive::{
    estimate_density, fit_mb, select_alpha, select_alpha_modeshifted, AlphaSearchConfig,
    ResidualSet,
};
use crate::gnc::{gnc_amb_pipeline, run_gnc, AmbPipelineConfig, GncError, GncProblem, GncRule,
    GncSchedule, GncStage};
use crate::loss::Kernel;
use crate::solver::{gauss_newton_se3, GaussNewtonOptions, SolveError};
use nalgebra::{Matrix3, Vector3, Vector6};

/// One association: indices into both clouds plus the (fixed-cloud) normal
/// used by the point-to-plane residual.
#[derive(Debug, Clone, Copy)]
pub struct Correspondence {
    pub index_p: usize,
    pub index_q: usize,
    pub normal: Vector3<f64>,
}

/// Point-to-point error and its Mahalanobis distance under
/// `Sigma = C R_p C^T + R_q`.
pub fn point_to_point_error(
    pose: &Pose,
    p: &Vector3<f64>,
    q: &Vector3<f64>,
    r_p: &Matrix3<f64>,
    r_q: &Matrix3<f64>,
) -> (Vector3<f64>, f64) {
    let e = p - pose.transform_point(q);
    let sigma = pose.rotation * r_p * pose.rotation.transpose() + r_q;
    let inv = sigma.try_inverse().expect("error covariance must be SPD");
    let eps_sq = (e.transpose() * inv * e)[0];
    (e, eps_sq.max(0.0).sqrt())
}

/// Whitened point-to-plane residual and its left-perturbation Jacobian.
///
/// `r = n^T (p - (C q + t)) / sqrt(n^T Sigma n)`; the Jacobian row is
/// `[n^T (Cq + t)^ , -n^T]` with the same whitening.
pub fn point_to_plane_residual(
    pose: &Pose,
    p: &Vector3<f64>,
    normal: &Vector3<f64>,
    q: &Vector3<f64>,
    sigma: &Matrix3<f64>,
) -> (f64, Vector6<f64>) {
    let q_t = pose.transform_point(q);
    let scale = (normal.transpose() * sigma * normal)[0].sqrt();
    let r = normal.dot(&(p - q_t)) / scale;
    let hat_q = super::hat(&q_t);
    let j_phi = hat_q.transpose() * normal; // rows n^T q'^ transposed
    let row = Vector6::new(
        j_phi.x / scale,
        j_phi.y / scale,
        j_phi.z / scale,
        -normal.x / scale,
        -normal.y / scale,
        -normal.z / scale,
    );
    (r, row)
}

/// Weighting strategy per ICP iteration.
#[derive(Debug, Clone, Copy)]
pub enum IcpMethod {
    /// Fixed kernel on the point-to-point Mahalanobis residuals.
    Fixed(Kernel),
    /// Refit the shape parameter each iteration; `nonnegative` restricts
    /// the grid to `alpha >= 0` (the regime where the untruncated
    /// partition function exists).
    AdaptiveAlpha { nonnegative: bool },
    /// Refit mode and mode-shifted shape each iteration.
    AdaptiveMb,
    /// GNC sweeps (re-run from the convex surrogate at every
    /// re-association).
    GncTls,
    GncGm,
    Agnc,
    GncAmb,
}

impl IcpMethod {
    pub fn is_gnc(&self) -> bool {
        matches!(
            self,
            IcpMethod::GncTls | IcpMethod::GncGm | IcpMethod::Agnc | IcpMethod::GncAmb
        )
    }
}

#[derive(Debug, Clone)]
pub struct IcpOptions {
    pub max_iterations: usize,
    /// Convergence thresholds on the per-iteration pose update.
    pub rot_tol: f64,
    pub trans_tol: f64,
    /// Truncation bound for the adaptive fits, as a percentile of the
    /// current residual set (the benchmark default: 97.5).
    pub tau_percentile: f64,
    pub bins: usize,
    pub schedule: GncSchedule,
    /// Scale for the fixed Geman-McClure / truncated-LS thresholds; when
    /// `None`, the 99.73% chi-square bound for 3-dof errors is used.
    pub tls_threshold: Option<f64>,
}

impl Default for IcpOptions {
    fn default() -> Self {
        IcpOptions {
            max_iterations: 50,
            rot_tol: 1e-3,
            trans_tol: 1e-3,
            tau_percentile: 97.5,
            bins: 100,
            schedule: GncSchedule::default(),
            tls_threshold: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct IcpResult {
    pub pose: Pose,
    pub iterations: usize,
    pub converged: bool,
    /// The inner solver hit a rank-deficient system; the trial is reported
    /// as non-converged rather than crashing.
    pub solver_failed: bool,
    /// Iterations where a distribution fit failed and unit weights were
    /// used instead.
    pub fit_fallbacks: usize,
    /// GNC stage logs, one entry per (outer iteration, stage).
    pub stage_log: Vec<(usize, GncStage)>,
}

struct IcpGncProblem<'a> {
    corrs: &'a [Correspondence],
    p: &'a PointCloud,
    q: &'a PointCloud,
    r_p: Matrix3<f64>,
    r_q: Matrix3<f64>,
}

impl IcpGncProblem<'_> {
    fn gn_step(&self, weights: &[f64], pose: &Pose) -> Result<Pose, SolveError> {
        let sigma = pose.rotation * self.r_p * pose.rotation.transpose() + self.r_q;
        let residual_fn = |t: &Pose| {
            self.corrs
                .iter()
                .map(|c| {
                    point_to_plane_residual(
                        t,
                        &self.p.points[c.index_p],
                        &c.normal,
                        &self.q.points[c.index_q],
                        &sigma,
                    )
                    .0
                })
                .collect::<Vec<f64>>()
        };
        let jacobian_fn = |t: &Pose| {
            self.corrs
                .iter()
                .map(|c| {
                    point_to_plane_residual(
                        t,
                        &self.p.points[c.index_p],
                        &c.normal,
                        &self.q.points[c.index_q],
                        &sigma,
                    )
                    .1
                })
                .collect::<Vec<Vector6<f64>>>()
        };
        let opts = GaussNewtonOptions {
            rot_tol: 0.0,
            trans_tol: 0.0,
            max_iter: 1,
        };
        let (pose, _) = gauss_newton_se3(residual_fn, jacobian_fn, weights, *pose, &opts)?;
        Ok(pose)
    }
}

impl GncProblem for IcpGncProblem<'_> {
    type State = Pose;

    fn residuals(&self, pose: &Pose) -> Vec<f64> {
        self.corrs
            .iter()
            .map(|c| {
                point_to_point_error(
                    pose,
                    &self.p.points[c.index_p],
                    &self.q.points[c.index_q],
                    &self.r_p,
                    &self.r_q,
                )
                .1
            })
            .collect()
    }

    fn solve_weighted(&self, weights: &[f64], current: &Pose) -> Result<Pose, SolveError> {
        self.gn_step(weights, current)
    }
}

fn percentile_of(sorted: &[f64], pct: f64) -> f64 {
    let n = sorted.len();
    let rank = ((pct / 100.0 * n as f64).ceil() as usize).clamp(1, n);
    sorted[rank - 1]
}

/// Align the moving cloud `Q` to the fixed cloud `P` (which must carry
/// normals) starting from `t0`.
pub fn icp(
    p: &PointCloud,
    q: &PointCloud,
    t0: &Pose,
    method: IcpMethod,
    opts: &IcpOptions,
) -> Result<IcpResult, GeomError> {
    let normals = p.normals.as_ref().ok_or(GeomError::MissingNormals)?;
    p.validate_normals()?;
    if q.is_empty() {
        return Err(GeomError::EmptyCloud);
    }
    let tree = KdTree::build(&q.points)?;
    let r_p = Matrix3::identity() * p.sigma_point * p.sigma_point;
    let r_q = Matrix3::identity() * q.sigma_point * q.sigma_point;
    let tls_threshold = opts
        .tls_threshold
        .unwrap_or_else(|| crate::stats::chi2_quantile(3, 0.9973).sqrt());

    let mut pose = *t0;
    let mut iterations = 0;
    let mut converged = false;
    let mut solver_failed = false;
    let mut fit_fallbacks = 0;
    let mut stage_log = Vec::new();

    for iter in 0..opts.max_iterations {
        // Associate each fixed point (with a valid normal) to its nearest
        // moving point under the current pose. Queries run in Q's frame:
        // || p - (Cq + t) || = || C^T (p - t) - q ||.
        let inv = pose.inverse();
        let corrs: Vec<Correspondence> = p
            .points
            .iter()
            .enumerate()
            .filter_map(|(i, point)| {
                let normal = normals[i]?;
                let query = inv.transform_point(point);
                let index_q = tree.nearest(&query);
                Some(Correspondence {
                    index_p: i,
                    index_q,
                    normal,
                })
            })
            .collect();
        if corrs.is_empty() {
            return Err(GeomError::EmptyCloud);
        }
        let problem = IcpGncProblem {
            corrs: &corrs,
            p,
            q,
            r_p,
            r_q,
        };
        let eps = problem.residuals(&pose);

        let update = match method {
            IcpMethod::Fixed(kernel) => {
                let weights: Vec<f64> = eps.iter().map(|&e| kernel.weight(e)).collect();
                problem.gn_step(&weights, &pose)
            }
            IcpMethod::AdaptiveAlpha { nonnegative } => {
                match adaptive_alpha_weights(&eps, nonnegative, opts) {
                    Ok(weights) => problem.gn_step(&weights, &pose),
                    Err(_) => {
                        fit_fallbacks += 1;
                        problem.gn_step(&vec![1.0; eps.len()], &pose)
                    }
                }
            }
            IcpMethod::AdaptiveMb => match adaptive_mb_weights(&eps, opts) {
                Ok(weights) => problem.gn_step(&weights, &pose),
                Err(_) => {
                    fit_fallbacks += 1;
                    problem.gn_step(&vec![1.0; eps.len()], &pose)
                }
            },
            IcpMethod::GncTls | IcpMethod::GncGm | IcpMethod::Agnc | IcpMethod::GncAmb => {
                match gnc_sweep(&problem, &pose, method, &eps, tls_threshold, opts) {
                    Ok((new_pose, stages)) => {
                        stage_log.extend(stages.into_iter().map(|s| (iter, s)));
                        Ok(new_pose)
                    }
                    Err(GncError::SolveFailed { source, .. }) => Err(source),
                    Err(_) => {
                        fit_fallbacks += 1;
                        problem.gn_step(&vec![1.0; eps.len()], &pose)
                    }
                }
            }
        };

        let new_pose = match update {
            Ok(p) => p,
            Err(SolveError::RankDeficient { .. }) => {
                solver_failed = true;
                break;
            }
            Err(_) => {
                solver_failed = true;
                break;
            }
        };

        let delta = se3_log(&new_pose.compose(&pose.inverse()))
            .unwrap_or_else(|_| super::Twist::new(Vector3::repeat(1.0), Vector3::repeat(1.0)));
        pose = new_pose;
        iterations += 1;
        if delta.phi.norm() < opts.rot_tol && delta.rho.norm() < opts.trans_tol {
            converged = true;
            break;
        }
    }

    Ok(IcpResult {
        pose,
        iterations,
        converged,
        solver_failed,
        fit_fallbacks,
        stage_log,
    })
}

fn alpha_cfg_from(eps: &[f64], nonnegative: bool, opts: &IcpOptions) -> Option<AlphaSearchConfig> {
    let mut sorted = eps.to_vec();
    sorted.sort_by(f64::total_cmp);
    let tau = percentile_of(&sorted, opts.tau_percentile);
    if tau <= 0.0 {
        return None;
    }
    Some(if nonnegative {
        AlphaSearchConfig::nonnegative(tau)
    } else {
        AlphaSearchConfig::new(tau)
    })
}

fn adaptive_alpha_weights(
    eps: &[f64],
    nonnegative: bool,
    opts: &IcpOptions,
) -> Result<Vec<f64>, GncError> {
    let cfg = alpha_cfg_from(eps, nonnegative, opts)
        .ok_or(GncError::Fit(crate::adaptive::FitError::DegenerateResiduals))?;
    let rs = ResidualSet::new(eps.to_vec(), 3).map_err(GncError::Fit)?;
    let alpha = select_alpha(&rs, &cfg).map_err(GncError::Fit)?;
    let kernel = Kernel::adaptive(alpha);
    Ok(eps.iter().map(|&e| kernel.weight(e)).collect())
}

fn adaptive_mb_weights(eps: &[f64], opts: &IcpOptions) -> Result<Vec<f64>, GncError> {
    let cfg = alpha_cfg_from(eps, false, opts)
        .ok_or(GncError::Fit(crate::adaptive::FitError::DegenerateResiduals))?;
    let rs = ResidualSet::new(eps.to_vec(), 3).map_err(GncError::Fit)?;
    let q = estimate_density(&rs, opts.bins).map_err(GncError::Fit)?;
    let fit = fit_mb(&q, 3, cfg.tau).map_err(GncError::Fit)?;
    let sel = select_alpha_modeshifted(&rs, fit.mode, &cfg).map_err(GncError::Fit)?;
    let kernel = Kernel::amb(sel.alpha, fit.mode).expect("mode nonnegative");
    Ok(eps.iter().map(|&e| kernel.weight(e)).collect())
}

fn gnc_sweep(
    problem: &IcpGncProblem<'_>,
    pose: &Pose,
    method: IcpMethod,
    eps: &[f64],
    tls_threshold: f64,
    opts: &IcpOptions,
) -> Result<(Pose, Vec<GncStage>), GncError> {
    match method {
        IcpMethod::GncTls => {
            let outcome = run_gnc(
                problem,
                *pose,
                GncRule::GncTls {
                    threshold: tls_threshold,
                },
                &opts.schedule,
            )?;
            Ok((outcome.state, outcome.stages))
        }
        IcpMethod::GncGm => {
            let outcome = run_gnc(
                problem,
                *pose,
                GncRule::GncGm {
                    scale: tls_threshold,
                },
                &opts.schedule,
            )?;
            Ok((outcome.state, outcome.stages))
        }
        IcpMethod::Agnc => {
            let cfg = alpha_cfg_from(eps, false, opts)
                .ok_or(GncError::Fit(crate::adaptive::FitError::DegenerateResiduals))?;
            let rs = ResidualSet::new(eps.to_vec(), 3)?;
            let alpha_star = select_alpha(&rs, &cfg)?;
            let outcome = run_gnc(problem, *pose, GncRule::Agnc { alpha_star }, &opts.schedule)?;
            Ok((outcome.state, outcome.stages))
        }
        IcpMethod::GncAmb => {
            let cfg = alpha_cfg_from(eps, false, opts)
                .ok_or(GncError::Fit(crate::adaptive::FitError::DegenerateResiduals))?;
            let pipeline_cfg = AmbPipelineConfig {
                n_e: 3,
                bins: opts.bins,
                alpha: cfg,
                schedule: opts.schedule,
            };
            let result = gnc_amb_pipeline(problem, *pose, &pipeline_cfg)?;
            Ok((result.outcome.state, result.outcome.stages))
        }
        _ => unreachable!("gnc_sweep called with a non-GNC method"),
    }
}

/// Rotation (rad) and translation (m) magnitudes of `log(ref^-1 pose)`,
/// the standard posterior-error metric against a ground-truth pose.
pub fn pose_error(reference: &Pose, pose: &Pose) -> (f64, f64) {
    match se3_log(&reference.inverse().compose(pose)) {
        Ok(delta) => (delta.phi.norm(), delta.rho.norm()),
        // Angle at pi: report the worst case rather than failing.
        Err(_) => (std::f64::consts::PI, pose.translation.norm()),
    }
}

/// Compose an initial estimate from the ground truth and a perturbation
/// twist: `T_init = T_gt * exp(xi^)`.
pub fn perturbed_init(truth: &Pose, xi: &super::Twist) -> Pose {
    truth.compose(&se3_exp(xi))
}
