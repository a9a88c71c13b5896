//! Monte-Carlo linear-regression benchmark: synthetic data with
//! chi-square-calibrated outliers, solved by every configured method from
//! a pseudoinverse start.

use crate::config::LinRegConfig;
use crate::methods::{chi2_inlier_bound, solve_linreg, Method};
use crate::report::{LinregReport, LinregRow, StageLogRow};
use crate::rng::{stream_id, stream_rng};
use adaptive_gnc::solver::{LsBlock, WeightedLsProblem};
use adaptive_gnc::stats::standard_normal;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use std::time::Instant;

/// One generated instance.
pub struct LinregInstance {
    pub problem: WeightedLsProblem,
    pub truth: DVector<f64>,
    pub outlier_mask: Vec<bool>,
}

/// Generate `y_i = A_i x + noise`, then replace an exact fraction of the
/// measurements with offsets whose Mahalanobis magnitude lies uniformly in
/// `[radius_min, radius_max]` times the 99.73% chi-square radius, i.e.
/// every outlier violates the inlier bound at the true state.
pub fn gen_linreg<R: Rng + ?Sized>(
    cfg: &LinRegConfig,
    rate: f64,
    rng: &mut R,
) -> LinregInstance {
    let n = cfg.n_measurements;
    let p = cfg.state_dim;
    let m = cfg.meas_dim;
    let truth = DVector::from_fn(p, |_, _| standard_normal(rng));
    let chi_radius = chi2_inlier_bound(m as u32);

    let outlier_count = (rate * n as f64).round() as usize;
    // Random subset via partial Fisher-Yates over the index list.
    let mut indices: Vec<usize> = (0..n).collect();
    for i in 0..outlier_count.min(n) {
        let j = i + (rng.random::<f64>() * (n - i) as f64) as usize;
        indices.swap(i, j.min(n - 1));
    }
    let mut outlier_mask = vec![false; n];
    for &i in indices.iter().take(outlier_count) {
        outlier_mask[i] = true;
    }

    let blocks: Vec<LsBlock> = (0..n)
        .map(|i| {
            let a = DMatrix::from_fn(m, p, |_, _| standard_normal(rng));
            let clean = &a * &truth;
            let y = if outlier_mask[i] {
                // Uniform direction, magnitude beyond the inlier bound.
                let mut dir = DVector::from_fn(m, |_, _| standard_normal(rng));
                dir /= dir.norm();
                let radius = chi_radius
                    * (cfg.outlier_radius_min
                        + rng.random::<f64>() * (cfg.outlier_radius_max - cfg.outlier_radius_min));
                &clean + dir * (cfg.sigma * radius)
            } else {
                let noise = DVector::from_fn(m, |_, _| cfg.sigma * standard_normal(rng));
                &clean + noise
            };
            LsBlock::isotropic(a, y, cfg.sigma * cfg.sigma)
        })
        .collect();

    LinregInstance {
        problem: WeightedLsProblem::new(blocks).expect("generated blocks are consistent"),
        truth,
        outlier_mask,
    }
}

pub struct LinregRun {
    pub report: LinregReport,
    pub stages: Vec<StageLogRow>,
}

/// Run the full Monte-Carlo sweep. Trials execute in a rayon pool; each
/// trial derives its RNG from (seed, rate index, trial index), so the
/// thread count never affects the rows.
pub fn run_linreg_mc(cfg: &LinRegConfig) -> Result<LinregRun, String> {
    let methods = cfg.methods()?;
    cfg.validate()?;

    let cells: Vec<(usize, usize)> = (0..cfg.outlier_rates.len())
        .flat_map(|rate_idx| (0..cfg.trials).map(move |trial| (rate_idx, trial)))
        .collect();

    let results: Vec<(Vec<LinregRow>, Vec<StageLogRow>)> = cells
        .par_iter()
        .map(|&(rate_idx, trial)| run_trial(cfg, &methods, rate_idx, trial))
        .collect();

    let mut rows: Vec<LinregRow> = Vec::new();
    let mut stages: Vec<StageLogRow> = Vec::new();
    for (trial_rows, trial_stages) in results {
        rows.extend(trial_rows);
        stages.extend(trial_stages);
    }
    rows.sort_by(|a, b| {
        a.method
            .cmp(&b.method)
            .then(a.rate.total_cmp(&b.rate))
            .then(a.trial.cmp(&b.trial))
    });
    stages.sort_by(|a, b| {
        a.method
            .cmp(&b.method)
            .then(a.condition.cmp(&b.condition))
            .then(a.trial.cmp(&b.trial))
            .then(a.stage.stage.cmp(&b.stage.stage))
    });
    Ok(LinregRun {
        report: LinregReport { rows },
        stages,
    })
}

fn run_trial(
    cfg: &LinRegConfig,
    methods: &[Method],
    rate_idx: usize,
    trial: usize,
) -> (Vec<LinregRow>, Vec<StageLogRow>) {
    let rate = cfg.outlier_rates[rate_idx];
    let mut rng = stream_rng(cfg.seed, stream_id(&[rate_idx as u64, trial as u64]));
    let instance = gen_linreg(cfg, rate, &mut rng);
    let init = instance
        .problem
        .solve_unweighted()
        .expect("random Gaussian designs are full rank");
    let bound = chi2_inlier_bound(cfg.meas_dim as u32);

    let mut rows = Vec::with_capacity(methods.len());
    let mut stage_rows = Vec::new();
    for &method in methods {
        let start = Instant::now();
        let outcome = solve_linreg(
            method,
            &instance.problem,
            &init,
            cfg.tau,
            cfg.meas_dim as u32,
            bound,
        );
        let time_s = start.elapsed().as_secs_f64();
        match outcome {
            Ok(result) => {
                for stage in &result.stages {
                    stage_rows.push(StageLogRow {
                        method: method.name().into(),
                        condition: format!("rate={rate}"),
                        trial,
                        outer_iter: 0,
                        stage: *stage,
                    });
                }
                rows.push(LinregRow {
                    method: method.name().into(),
                    rate,
                    trial,
                    error: (&result.estimate - &instance.truth).norm(),
                    iterations: result.iterations,
                    success: result.converged,
                    time_s,
                    time_per_iter_s: time_s / result.iterations.max(1) as f64,
                });
            }
            Err(_) => {
                // A method crash flags the row; the run continues.
                rows.push(LinregRow {
                    method: method.name().into(),
                    rate,
                    trial,
                    error: f64::NAN,
                    iterations: 0,
                    success: false,
                    time_s,
                    time_per_iter_s: f64::NAN,
                });
            }
        }
    }
    (rows, stage_rows)
}
