//! Gauss-Newton over SE(3) with left-perturbation updates.

use super::linear::solve_spd;
use super::{SolveError, SolverReport};
use crate::geometry::{se3_exp, Pose, Twist};
use nalgebra::{DMatrix, DVector, Vector3, Vector6};

/// Convergence thresholds on the incremental twist, matching the usual
/// registration settings (1e-3 rad / 1e-3 m).
#[derive(Debug, Clone, Copy)]
pub struct GaussNewtonOptions {
    pub rot_tol: f64,
    pub trans_tol: f64,
    pub max_iter: usize,
}

impl Default for GaussNewtonOptions {
    fn default() -> Self {
        GaussNewtonOptions {
            rot_tol: 1e-3,
            trans_tol: 1e-3,
            max_iter: 20,
        }
    }
}

/// Minimize `1/2 sum_i w_i r_i(T)^2` over poses.
///
/// `residual_fn` returns one whitened scalar per row; `jacobian_fn` returns
/// the matching gradient rows with respect to the left-perturbation twist
/// `(phi, rho)`, i.e. `r(exp(xi^) T) ~ r(T) + J xi`. The update is
/// `T <- exp(xi^) T` with re-orthonormalization every step, so rotation
/// drift never accumulates.
pub fn gauss_newton_se3<R, J>(
    residual_fn: R,
    jacobian_fn: J,
    weights: &[f64],
    init: Pose,
    opts: &GaussNewtonOptions,
) -> Result<(Pose, SolverReport), SolveError>
where
    R: Fn(&Pose) -> Vec<f64>,
    J: Fn(&Pose) -> Vec<Vector6<f64>>,
{
    let mut pose = init;
    let mut step_norms = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..opts.max_iter {
        let residuals = residual_fn(&pose);
        let rows = jacobian_fn(&pose);
        debug_assert_eq!(residuals.len(), rows.len());
        debug_assert_eq!(residuals.len(), weights.len());

        let mut h = DMatrix::<f64>::zeros(6, 6);
        let mut g = DVector::<f64>::zeros(6);
        for ((row, &r), &w) in rows.iter().zip(&residuals).zip(weights) {
            if w == 0.0 {
                continue;
            }
            for i in 0..6 {
                g[i] += w * row[i] * r;
                for j in 0..6 {
                    h[(i, j)] += w * row[i] * row[j];
                }
            }
        }
        let delta = solve_spd(h, -g)?;
        let twist = Twist::new(
            Vector3::new(delta[0], delta[1], delta[2]),
            Vector3::new(delta[3], delta[4], delta[5]),
        );
        pose = se3_exp(&twist).compose(&pose);
        pose.reorthonormalize();
        iterations += 1;

        let rot_step = twist.phi.norm();
        let trans_step = twist.rho.norm();
        step_norms.push((rot_step * rot_step + trans_step * trans_step).sqrt());
        if rot_step < opts.rot_tol && trans_step < opts.trans_tol {
            converged = true;
            break;
        }
    }

    let final_objective = 0.5
        * residual_fn(&pose)
            .iter()
            .zip(weights)
            .map(|(r, w)| w * r * r)
            .sum::<f64>();
    Ok((
        pose,
        SolverReport {
            iterations,
            final_objective,
            converged,
            diverged: false,
            step_norms,
        },
    ))
}
