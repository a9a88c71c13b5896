//! Robust loss functions, their gradients, and IRLS weights.
//!
//! The central object is the generalized adaptive loss
//!
//! ```text
//! rho(eps, alpha) = |alpha-2|/alpha * ((eps^2/|alpha-2| + 1)^(alpha/2) - 1)
//! ```
//!
//! with shape parameter `alpha <= 2`, evaluated through its piecewise form so
//! the singular points `alpha = 2`, `alpha = 0`, and `alpha = -inf` are exact.
//! Classical kernels (Cauchy, Welsch, Geman-McClure, truncated least squares)
//! are provided for baseline comparisons, and the norm-aware mode-shifted
//! variant treats residuals below a distribution mode as exact inliers.
//!
//! Everything here is a pure function of its arguments; residuals are
//! unitless Mahalanobis distances and therefore nonnegative.

use crate::stats::chi2_quantile;
use thiserror::Error;

/// Width of the guard band around the singular shape values 0 and 2.
/// Inside the band the exact limit branch is used instead of the general
/// formula, which degenerates to 0/0 there.
const ALPHA_BRANCH_GUARD: f64 = 1e-5;

/// Underflow floor keeping weights strictly positive: the Welsch branch
/// reaches exp(-eps^2/2), which hits subnormal zero near eps = 38.
const MIN_WEIGHT: f64 = 1e-300;

#[derive(Debug, Error, PartialEq)]
pub enum LossError {
    #[error("residual must be finite and nonnegative, got {0}")]
    InvalidResidual(f64),
    #[error("shape parameter must be finite and <= 2 (or Alpha::NEG_INF), got {0}")]
    InvalidAlpha(f64),
    #[error("scale parameter must be strictly positive and finite, got {0}")]
    InvalidScale(f64),
    #[error("mode must be nonnegative and finite, got {0}")]
    InvalidMode(f64),
    #[error("residual grid must start at 0 and be sorted ascending")]
    UnsortedGrid,
}

/// Shape parameter of the adaptive loss: an extended real in [-inf, 2].
///
/// Negative infinity (the Welsch limit) is a distinguished sentinel so the
/// piecewise branches can dispatch on it explicitly instead of pushing an
/// infinity through the general formula.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Alpha(f64);

impl Alpha {
    /// The Welsch limit alpha = -inf.
    pub const NEG_INF: Alpha = Alpha(f64::NEG_INFINITY);
    /// Ordinary least squares.
    pub const QUADRATIC: Alpha = Alpha(2.0);

    /// A finite shape value; must be <= 2.
    pub fn new(value: f64) -> Result<Self, LossError> {
        if value == f64::NEG_INFINITY {
            return Ok(Self::NEG_INF);
        }
        if !value.is_finite() || value > 2.0 {
            return Err(LossError::InvalidAlpha(value));
        }
        Ok(Alpha(value))
    }

    pub fn is_neg_inf(&self) -> bool {
        self.0 == f64::NEG_INFINITY
    }

    /// Raw value; `-inf` for the sentinel.
    pub fn value(&self) -> f64 {
        self.0
    }

    fn branch(&self) -> AlphaBranch {
        if self.is_neg_inf() {
            AlphaBranch::NegInf
        } else if (self.0 - 2.0).abs() < ALPHA_BRANCH_GUARD {
            AlphaBranch::Quadratic
        } else if self.0.abs() < ALPHA_BRANCH_GUARD {
            AlphaBranch::Zero
        } else {
            AlphaBranch::General(self.0)
        }
    }
}

impl std::fmt::Display for Alpha {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_neg_inf() {
            write!(f, "-inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

enum AlphaBranch {
    Quadratic,
    Zero,
    NegInf,
    General(f64),
}

fn check_residual(eps: f64) -> Result<f64, LossError> {
    if !eps.is_finite() || eps < 0.0 {
        return Err(LossError::InvalidResidual(eps));
    }
    Ok(eps)
}

/// Adaptive robust loss rho(eps, alpha), piecewise-exact at the singular
/// shape values.
pub fn rho_adaptive(eps: f64, alpha: Alpha) -> Result<f64, LossError> {
    let eps = check_residual(eps)?;
    let half_sq = 0.5 * eps * eps;
    Ok(match alpha.branch() {
        AlphaBranch::Quadratic => half_sq,
        AlphaBranch::Zero => (half_sq + 1.0).ln(),
        AlphaBranch::NegInf => 1.0 - (-half_sq).exp(),
        AlphaBranch::General(a) => {
            let am2 = (a - 2.0).abs();
            // + 0.0 normalizes the negative zero produced at eps = 0 when
            // the leading factor is negative.
            am2 / a * ((eps * eps / am2 + 1.0).powf(0.5 * a) - 1.0) + 0.0
        }
    })
}

/// IRLS weight of the adaptive loss, w(eps, alpha) = rho'(eps) / eps.
///
/// Always in (0, 1]; equals 1 exactly when eps = 0 or alpha = 2.
pub fn weight_adaptive(eps: f64, alpha: Alpha) -> f64 {
    debug_assert!(eps.is_finite() && eps >= 0.0);
    match alpha.branch() {
        AlphaBranch::Quadratic => 1.0,
        AlphaBranch::Zero => 2.0 / (eps * eps + 2.0),
        AlphaBranch::NegInf => (-0.5 * eps * eps).exp().max(MIN_WEIGHT),
        AlphaBranch::General(a) => {
            let am2 = (a - 2.0).abs();
            (eps * eps / am2 + 1.0).powf(0.5 * a - 1.0).max(MIN_WEIGHT)
        }
    }
}

/// Mode-shifted weight: residuals at or below the mode are exact inliers,
/// everything above is weighted by the adaptive kernel on `eps - mode`.
pub fn weight_amb(eps: f64, mode: f64, alpha: Alpha) -> f64 {
    debug_assert!(mode >= 0.0 && mode.is_finite());
    if eps <= mode {
        1.0
    } else {
        weight_adaptive(eps - mode, alpha)
    }
}

/// Cumulative trapezoidal integral of `t * weight_amb(t, mode, alpha)` over
/// an ascending grid starting at 0. This is the numeric mode-shifted loss
/// curve; there is no closed form for it.
pub fn rho_amb_numeric(eps_grid: &[f64], mode: f64, alpha: Alpha) -> Result<Vec<f64>, LossError> {
    if mode < 0.0 || !mode.is_finite() {
        return Err(LossError::InvalidMode(mode));
    }
    if eps_grid.is_empty() || eps_grid[0] != 0.0 || eps_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(LossError::UnsortedGrid);
    }
    let mut out = Vec::with_capacity(eps_grid.len());
    let integrand = |t: f64| t * weight_amb(t, mode, alpha);
    let mut acc = 0.0;
    out.push(0.0);
    for w in eps_grid.windows(2) {
        acc += 0.5 * (w[1] - w[0]) * (integrand(w[0]) + integrand(w[1]));
        out.push(acc);
    }
    Ok(out)
}

/// Kernel families used across the benchmarks. Scale parameters are on the
/// Mahalanobis residual axis; the classical kernels default to scale 1
/// because residuals arrive covariance-normalized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kernel {
    Quadratic,
    /// w = 1 / (1 + (eps/c)^2)
    Cauchy { scale: f64 },
    /// w = exp(-(eps/c)^2)
    Welsch { scale: f64 },
    /// w = (1 + (eps/c)^2)^-2, from rho = (c^2 eps^2 / 2) / (c^2 + eps^2)
    GemanMcClure { scale: f64 },
    /// w = 1 for eps <= threshold, 0 beyond
    TruncatedLs { threshold: f64 },
    /// The adaptive loss at a fixed shape value.
    Adaptive { alpha: Alpha },
    /// Mode-shifted adaptive loss.
    Amb { alpha: Alpha, mode: f64 },
}

fn check_scale(c: f64) -> Result<f64, LossError> {
    if !c.is_finite() || c <= 0.0 {
        return Err(LossError::InvalidScale(c));
    }
    Ok(c)
}

impl Kernel {
    pub fn cauchy(scale: f64) -> Result<Self, LossError> {
        Ok(Kernel::Cauchy {
            scale: check_scale(scale)?,
        })
    }

    pub fn welsch(scale: f64) -> Result<Self, LossError> {
        Ok(Kernel::Welsch {
            scale: check_scale(scale)?,
        })
    }

    pub fn geman_mcclure(scale: f64) -> Result<Self, LossError> {
        Ok(Kernel::GemanMcClure {
            scale: check_scale(scale)?,
        })
    }

    pub fn truncated_ls(threshold: f64) -> Result<Self, LossError> {
        Ok(Kernel::TruncatedLs {
            threshold: check_scale(threshold)?,
        })
    }

    /// Truncated least squares with the threshold at the 99.73% chi-square
    /// quantile for `dim`-dimensional errors, i.e. anything statistically
    /// implausible as an inlier is cut off.
    pub fn truncated_ls_chi2(dim: u32) -> Self {
        Kernel::TruncatedLs {
            threshold: chi2_quantile(dim, 0.9973).sqrt(),
        }
    }

    pub fn adaptive(alpha: Alpha) -> Self {
        Kernel::Adaptive { alpha }
    }

    pub fn amb(alpha: Alpha, mode: f64) -> Result<Self, LossError> {
        if mode < 0.0 || !mode.is_finite() {
            return Err(LossError::InvalidMode(mode));
        }
        Ok(Kernel::Amb { alpha, mode })
    }

    /// IRLS weight at residual `eps`. In (0, 1] for every kernel except
    /// truncated least squares, which is binary.
    pub fn weight(&self, eps: f64) -> f64 {
        debug_assert!(eps.is_finite() && eps >= 0.0);
        match *self {
            Kernel::Quadratic => 1.0,
            Kernel::Cauchy { scale } => {
                let r = eps / scale;
                1.0 / (1.0 + r * r)
            }
            Kernel::Welsch { scale } => {
                let r = eps / scale;
                (-r * r).exp().max(MIN_WEIGHT)
            }
            Kernel::GemanMcClure { scale } => {
                let r = eps / scale;
                let base = 1.0 + r * r;
                1.0 / (base * base)
            }
            Kernel::TruncatedLs { threshold } => {
                if eps <= threshold {
                    1.0
                } else {
                    0.0
                }
            }
            Kernel::Adaptive { alpha } => weight_adaptive(eps, alpha),
            Kernel::Amb { alpha, mode } => weight_amb(eps, mode, alpha),
        }
    }

    /// Gradient of the loss, d rho / d eps = eps * w(eps). This identity is
    /// what makes the IRLS substitution exact.
    pub fn grad(&self, eps: f64) -> f64 {
        eps * self.weight(eps)
    }

    /// Loss value. For the mode-shifted kernel no closed form exists; the
    /// returned value is the quadratic core plus the shifted adaptive tail,
    /// which is a monotone surrogate suitable for convergence monitoring
    /// (use [`rho_amb_numeric`] for the exact curve).
    pub fn rho(&self, eps: f64) -> Result<f64, LossError> {
        let eps = check_residual(eps)?;
        Ok(match *self {
            Kernel::Quadratic => 0.5 * eps * eps,
            Kernel::Cauchy { scale } => {
                let r = eps / scale;
                0.5 * scale * scale * (1.0 + r * r).ln()
            }
            Kernel::Welsch { scale } => {
                let r = eps / scale;
                0.5 * scale * scale * (1.0 - (-r * r).exp())
            }
            Kernel::GemanMcClure { scale } => {
                let c2 = scale * scale;
                0.5 * c2 * eps * eps / (c2 + eps * eps)
            }
            Kernel::TruncatedLs { threshold } => 0.5 * eps.min(threshold) * eps.min(threshold),
            Kernel::Adaptive { alpha } => rho_adaptive(eps, alpha)?,
            Kernel::Amb { alpha, mode } => {
                let core = eps.min(mode);
                0.5 * core * core + rho_adaptive((eps - mode).max(0.0), alpha)?
            }
        })
    }
}
