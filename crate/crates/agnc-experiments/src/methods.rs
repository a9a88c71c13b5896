//! The benchmark method roster and the per-method solver dispatch.

use adaptive_gnc::adaptive::AlphaSearchConfig;
use adaptive_gnc::gnc::{
    agnc_pipeline, gnc_amb_pipeline, run_gnc, AmbPipelineConfig, GncRule, GncSchedule, GncStage,
};
use adaptive_gnc::geometry::IcpMethod;
use adaptive_gnc::solver::{irls, IrlsOptions, WeightPolicy, WeightedLsProblem};
use adaptive_gnc::Kernel;
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

/// Robust estimation methods compared by the benchmarks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Cauchy,
    Welsch,
    /// Adaptive shape restricted to alpha >= 0.
    Ba,
    /// Adaptive shape on the full truncated grid.
    Ca,
    /// Mode-shifted adaptive loss.
    Amb,
    GncGm,
    GncTls,
    Agnc,
    GncAmb,
}

impl Method {
    pub const ALL: [Method; 9] = [
        Method::Cauchy,
        Method::Welsch,
        Method::Ba,
        Method::Ca,
        Method::Amb,
        Method::GncGm,
        Method::GncTls,
        Method::Agnc,
        Method::GncAmb,
    ];

    /// The eight methods of the regression benchmark.
    pub fn linreg_default() -> Vec<Method> {
        vec![
            Method::Welsch,
            Method::Ba,
            Method::Ca,
            Method::Amb,
            Method::GncGm,
            Method::GncTls,
            Method::Agnc,
            Method::GncAmb,
        ]
    }

    /// The eight methods of the alignment benchmark.
    pub fn icp_default() -> Vec<Method> {
        vec![
            Method::Cauchy,
            Method::Welsch,
            Method::Ba,
            Method::Ca,
            Method::Amb,
            Method::GncTls,
            Method::Agnc,
            Method::GncAmb,
        ]
    }

    pub fn name(&self) -> &'static str {
        match self {
            Method::Cauchy => "cauchy",
            Method::Welsch => "welsch",
            Method::Ba => "ba",
            Method::Ca => "ca",
            Method::Amb => "amb",
            Method::GncGm => "gnc-gm",
            Method::GncTls => "gnc-tls",
            Method::Agnc => "agnc",
            Method::GncAmb => "gnc-amb",
        }
    }

    pub fn parse(name: &str) -> Option<Method> {
        Method::ALL.iter().copied().find(|m| m.name() == name)
    }

    pub fn is_gnc(&self) -> bool {
        matches!(
            self,
            Method::GncGm | Method::GncTls | Method::Agnc | Method::GncAmb
        )
    }

    pub fn icp_method(&self) -> IcpMethod {
        match self {
            Method::Cauchy => IcpMethod::Fixed(Kernel::cauchy(1.0).unwrap()),
            Method::Welsch => IcpMethod::Fixed(Kernel::welsch(1.0).unwrap()),
            Method::Ba => IcpMethod::AdaptiveAlpha { nonnegative: true },
            Method::Ca => IcpMethod::AdaptiveAlpha { nonnegative: false },
            Method::Amb => IcpMethod::AdaptiveMb,
            Method::GncGm => IcpMethod::GncGm,
            Method::GncTls => IcpMethod::GncTls,
            Method::Agnc => IcpMethod::Agnc,
            Method::GncAmb => IcpMethod::GncAmb,
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone)]
pub struct MethodOutcome {
    pub estimate: DVector<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub stages: Vec<GncStage>,
}

/// Solve one linear-regression instance with the given method, starting
/// from the pseudoinverse estimate. `inlier_bound` is the chi-square
/// residual threshold shared by the truncated kernels.
pub fn solve_linreg(
    method: Method,
    problem: &WeightedLsProblem,
    init: &DVector<f64>,
    tau: f64,
    n_e: u32,
    inlier_bound: f64,
) -> Result<MethodOutcome, String> {
    let schedule = GncSchedule::default();
    let irls_opts = IrlsOptions::default();
    let from_irls = |policy: WeightPolicy| -> Result<MethodOutcome, String> {
        let (estimate, report) =
            irls(problem, &policy, init.clone(), &irls_opts).map_err(|e| e.to_string())?;
        Ok(MethodOutcome {
            estimate,
            iterations: report.iterations,
            converged: report.converged && !report.diverged,
            stages: Vec::new(),
        })
    };
    match method {
        Method::Cauchy => from_irls(WeightPolicy::Fixed(Kernel::cauchy(1.0).unwrap())),
        Method::Welsch => from_irls(WeightPolicy::Fixed(Kernel::welsch(1.0).unwrap())),
        Method::Ba => from_irls(WeightPolicy::AdaptiveAlpha {
            cfg: AlphaSearchConfig::nonnegative(tau),
        }),
        Method::Ca => from_irls(WeightPolicy::AdaptiveAlpha {
            cfg: AlphaSearchConfig::new(tau),
        }),
        Method::Amb => from_irls(WeightPolicy::AdaptiveMb {
            cfg: AlphaSearchConfig::new(tau),
            n_e,
            bins: 100,
        }),
        Method::GncGm => {
            let outcome = run_gnc(
                problem,
                init.clone(),
                GncRule::GncGm {
                    scale: inlier_bound,
                },
                &schedule,
            )
            .map_err(|e| e.to_string())?;
            Ok(MethodOutcome {
                estimate: outcome.state,
                iterations: outcome.stages.len(),
                converged: outcome.converged,
                stages: outcome.stages,
            })
        }
        Method::GncTls => {
            let outcome = run_gnc(
                problem,
                init.clone(),
                GncRule::GncTls {
                    threshold: inlier_bound,
                },
                &schedule,
            )
            .map_err(|e| e.to_string())?;
            Ok(MethodOutcome {
                estimate: outcome.state,
                iterations: outcome.stages.len(),
                converged: outcome.converged,
                stages: outcome.stages,
            })
        }
        Method::Agnc => {
            let (outcome, _alpha) = agnc_pipeline(
                problem,
                init.clone(),
                &AlphaSearchConfig::new(tau),
                &schedule,
            )
            .map_err(|e| e.to_string())?;
            Ok(MethodOutcome {
                estimate: outcome.state,
                iterations: outcome.stages.len(),
                converged: outcome.converged,
                stages: outcome.stages,
            })
        }
        Method::GncAmb => {
            let cfg = AmbPipelineConfig {
                n_e,
                bins: 100,
                alpha: AlphaSearchConfig::new(tau),
                schedule,
            };
            let result =
                gnc_amb_pipeline(problem, init.clone(), &cfg).map_err(|e| e.to_string())?;
            Ok(MethodOutcome {
                estimate: result.outcome.state,
                iterations: result.outcome.stages.len(),
                converged: result.outcome.converged,
                stages: result.outcome.stages,
            })
        }
    }
}

/// Shape value usable for the fixed truncated kernels: the 99.73%
/// chi-square bound on `dim`-dimensional Mahalanobis residuals.
pub fn chi2_inlier_bound(dim: u32) -> f64 {
    adaptive_gnc::stats::chi2_quantile(dim, 0.9973).sqrt()
}
