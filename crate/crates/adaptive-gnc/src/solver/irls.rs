//! The plain IRLS loop for non-GNC kernels: alternate weight computation
//! and weighted linear solves until the state stops moving.

use super::{SolveError, WeightedLsProblem};
use crate::adaptive::{
    estimate_density, fit_mb, select_alpha, select_alpha_modeshifted, AlphaSearchConfig,
    ResidualSet,
};
use crate::loss::Kernel;
use nalgebra::DVector;

/// Iteration record shared by the solvers.
#[derive(Debug, Clone)]
pub struct SolverReport {
    pub iterations: usize,
    pub final_objective: f64,
    pub converged: bool,
    /// Set when the objective increased three times in a row; the best
    /// iterate seen is returned in that case.
    pub diverged: bool,
    pub step_norms: Vec<f64>,
}

/// How weights are produced each IRLS iteration.
#[derive(Debug, Clone)]
pub enum WeightPolicy {
    /// Fixed kernel, weights depend only on the current residuals.
    Fixed(Kernel),
    /// Refit the shape parameter by grid search every iteration.
    AdaptiveAlpha { cfg: AlphaSearchConfig },
    /// Refit the Maxwell-Boltzmann mode and the mode-shifted shape
    /// parameter every iteration.
    AdaptiveMb {
        cfg: AlphaSearchConfig,
        n_e: u32,
        bins: usize,
    },
}

impl WeightPolicy {
    /// Weights plus the kernel that produced them (the kernel is also used
    /// for objective monitoring).
    fn weights(&self, eps: &[f64]) -> Result<(Vec<f64>, Kernel), SolveError> {
        match self {
            WeightPolicy::Fixed(kernel) => {
                Ok((eps.iter().map(|&e| kernel.weight(e)).collect(), *kernel))
            }
            WeightPolicy::AdaptiveAlpha { cfg } => {
                let rs = ResidualSet::new(eps.to_vec(), 1)?;
                let alpha = select_alpha(&rs, cfg)?;
                let kernel = Kernel::adaptive(alpha);
                Ok((eps.iter().map(|&e| kernel.weight(e)).collect(), kernel))
            }
            WeightPolicy::AdaptiveMb { cfg, n_e, bins } => {
                let rs = ResidualSet::new(eps.to_vec(), *n_e)?;
                let q = estimate_density(&rs, *bins)?;
                let fit = fit_mb(&q, *n_e, cfg.tau)?;
                let sel = select_alpha_modeshifted(&rs, fit.mode, cfg)?;
                let kernel = Kernel::amb(sel.alpha, fit.mode).expect("mode is nonnegative");
                Ok((eps.iter().map(|&e| kernel.weight(e)).collect(), kernel))
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct IrlsOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for IrlsOptions {
    fn default() -> Self {
        IrlsOptions {
            tol: 1e-8,
            max_iter: 50,
        }
    }
}

/// Iteratively reweighted least squares from an initial state estimate.
///
/// Converges when the state update norm drops below `tol` or when the
/// weights reach a fixed point. Three consecutive objective increases flag
/// divergence, in which case the best iterate seen so far is returned.
pub fn irls(
    problem: &WeightedLsProblem,
    policy: &WeightPolicy,
    init: DVector<f64>,
    opts: &IrlsOptions,
) -> Result<(DVector<f64>, SolverReport), SolveError> {
    let mut x = init;
    let (mut weights, mut kernel) = policy.weights(&problem.residuals(&x))?;

    let objective_of = |kernel: &Kernel, eps: &[f64]| -> f64 {
        eps.iter()
            .map(|&e| kernel.rho(e).unwrap_or(f64::INFINITY))
            .sum()
    };

    let mut best_x = x.clone();
    let mut best_objective = objective_of(&kernel, &problem.residuals(&x));
    let mut prev_objective = best_objective;
    let mut increases = 0;
    let mut step_norms = Vec::new();
    let mut converged = false;
    let mut diverged = false;
    let mut iterations = 0;

    for _ in 0..opts.max_iter {
        let x_new = problem.solve(&weights)?;
        iterations += 1;
        let step = (&x_new - &x).norm();
        step_norms.push(step);
        x = x_new;

        let eps = problem.residuals(&x);
        let (w_new, k_new) = policy.weights(&eps)?;
        let objective = objective_of(&k_new, &eps);

        if objective < best_objective {
            best_objective = objective;
            best_x = x.clone();
        }
        if objective > prev_objective + 1e-15 {
            increases += 1;
            if increases >= 3 {
                diverged = true;
                break;
            }
        } else {
            increases = 0;
        }
        prev_objective = objective;

        let weights_stationary = weights
            .iter()
            .zip(&w_new)
            .all(|(a, b)| (a - b).abs() < 1e-12);
        weights = w_new;
        kernel = k_new;

        if step < opts.tol || weights_stationary {
            converged = true;
            break;
        }
    }

    let (x_final, final_objective) = if diverged {
        (best_x, best_objective)
    } else {
        let obj = objective_of(&kernel, &problem.residuals(&x));
        (x, obj)
    };
    Ok((
        x_final,
        SolverReport {
            iterations,
            final_objective,
            converged,
            diverged,
            step_norms,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::Alpha;
    use crate::solver::LsBlock;
    use approx::assert_relative_eq;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn scalar_location(ys: &[f64]) -> WeightedLsProblem {
        WeightedLsProblem::new(
            ys.iter()
                .map(|&y| {
                    LsBlock::isotropic(
                        DMatrix::from_element(1, 1, 1.0),
                        DVector::from_element(1, y),
                        1.0,
                    )
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn quadratic_kernel_converges_in_one_iteration() {
        let problem = scalar_location(&[1.0, 2.0, 6.0]);
        let (x, report) = irls(
            &problem,
            &WeightPolicy::Fixed(Kernel::Quadratic),
            DVector::from_element(1, 100.0),
            &IrlsOptions::default(),
        )
        .unwrap();
        assert_relative_eq!(x[0], 3.0, epsilon = 1e-12);
        assert_eq!(report.iterations, 1);
        assert!(report.converged);
    }

    #[test]
    fn welsch_rejects_single_outlier_from_good_init() {
        let mut ys = vec![0.0; 9];
        ys.push(100.0);
        let problem = scalar_location(&ys);
        let (x, report) = irls(
            &problem,
            &WeightPolicy::Fixed(Kernel::welsch(1.0).unwrap()),
            DVector::from_element(1, 0.0),
            &IrlsOptions::default(),
        )
        .unwrap();
        assert!(x[0].abs() < 1e-3, "estimate {}", x[0]);
        assert!(report.converged);
    }

    #[test]
    fn welsch_from_bad_init_stays_in_outlier_basin() {
        // The robust objective has two basins; starting at the outlier the
        // local solver stays there, which is the motivation for GNC.
        let mut ys = vec![0.0; 9];
        ys.push(100.0);
        let problem = scalar_location(&ys);
        let (x, _) = irls(
            &problem,
            &WeightPolicy::Fixed(Kernel::welsch(1.0).unwrap()),
            DVector::from_element(1, 100.0),
            &IrlsOptions::default(),
        )
        .unwrap();
        assert!((x[0] - 100.0).abs() < 1.0, "estimate {}", x[0]);

        // 1-D scan oracle: the global minimum is near 0, not near 100.
        let objective = |x: f64| -> f64 {
            ys.iter()
                .map(|&y| {
                    let eps = (x - y).abs();
                    0.5 * (1.0 - (-eps * eps).exp())
                })
                .sum()
        };
        let mut best = (f64::INFINITY, 0.0);
        let mut t = -1.0;
        while t <= 101.0 {
            let v = objective(t);
            if v < best.0 {
                best = (v, t);
            }
            t += 1e-3;
        }
        assert!(best.1.abs() < 0.01, "global argmin {}", best.1);
    }

    #[test]
    fn objective_nonincreasing_for_convex_shapes() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let blocks: Vec<LsBlock> = (0..40)
            .map(|_| {
                let a = DMatrix::from_fn(2, 2, |_, _| crate::stats::standard_normal(&mut rng));
                let x_true = DVector::from_vec(vec![1.0, -2.0]);
                let mut y = &a * &x_true;
                y[0] += 0.3 * crate::stats::standard_normal(&mut rng);
                y[1] += 0.3 * crate::stats::standard_normal(&mut rng);
                if rng.random::<f64>() < 0.2 {
                    y[0] += 15.0;
                }
                LsBlock::isotropic(a, y, 0.09)
            })
            .collect();
        let problem = WeightedLsProblem::new(blocks).unwrap();
        for alpha in [2.0, 1.0, 0.5, 0.0] {
            let kernel = Kernel::adaptive(Alpha::new(alpha).unwrap());
            let init = problem.solve_unweighted().unwrap();
            let mut prev = f64::INFINITY;
            let mut x = init;
            for _ in 0..20 {
                let eps = problem.residuals(&x);
                let obj: f64 = eps.iter().map(|&e| kernel.rho(e).unwrap()).sum();
                assert!(
                    obj <= prev + 1e-9,
                    "alpha={alpha}: objective rose {prev} -> {obj}"
                );
                prev = obj;
                let w: Vec<f64> = eps.iter().map(|&e| kernel.weight(e)).collect();
                x = problem.solve(&w).unwrap();
            }
        }
    }

    #[test]
    fn adaptive_alpha_policy_handles_outliers() {
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let mut ys: Vec<f64> = (0..60)
            .map(|_| 0.1 * crate::stats::standard_normal(&mut rng))
            .collect();
        ys.extend((0..40).map(|_| 30.0 + rng.random::<f64>()));
        let problem = scalar_location(&ys);
        let policy = WeightPolicy::AdaptiveAlpha {
            cfg: AlphaSearchConfig::new(10.0),
        };
        let init = problem.solve_unweighted().unwrap();
        let (x, _) = irls(&problem, &policy, init, &IrlsOptions::default()).unwrap();
        assert!(x[0].abs() < 0.1, "estimate {}", x[0]);
    }

    #[test]
    fn adaptive_mb_policy_runs_on_chi_distributed_noise() {
        let mut rng = ChaCha12Rng::seed_from_u64(15);
        let x_true = DVector::from_vec(vec![0.5, -1.5, 2.0]);
        let blocks: Vec<LsBlock> = (0..300)
            .map(|_| {
                let a = DMatrix::from_fn(3, 3, |_, _| crate::stats::standard_normal(&mut rng));
                let mut y = &a * &x_true;
                for k in 0..3 {
                    y[k] += 0.1 * crate::stats::standard_normal(&mut rng);
                }
                if rng.random::<f64>() < 0.3 {
                    for k in 0..3 {
                        y[k] += 3.0 + rng.random::<f64>();
                    }
                }
                LsBlock::isotropic(a, y, 0.01)
            })
            .collect();
        let problem = WeightedLsProblem::new(blocks).unwrap();
        let policy = WeightPolicy::AdaptiveMb {
            cfg: AlphaSearchConfig::new(40.0),
            n_e: 3,
            bins: 50,
        };
        let init = problem.solve_unweighted().unwrap();
        let init_err = (&init - &x_true).norm();
        let (x, _) = irls(&problem, &policy, init, &IrlsOptions::default()).unwrap();
        let err = (&x - &x_true).norm();
        assert!(err < init_err, "IRLS did not improve: {err} vs {init_err}");
        assert!(err < 0.05, "error {err}");
    }
}
