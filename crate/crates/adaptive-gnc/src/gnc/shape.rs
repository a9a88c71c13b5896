//! Shape functions mapping the GNC control parameter to an effective shape
//! value, and the schedule that drives them.
//!
//! A valid shape function satisfies `f -> 2` at one end of the mu range
//! (the convex surrogate), `f -> alpha*` at the other (the original loss),
//! and `f <= 2` everywhere in between.

use super::GncError;
use crate::loss::Alpha;

/// The two shape-function variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapeFunction {
    /// `f = (alpha* mu + 2) / (mu + 1)` on `mu > 0`; starts convex at
    /// `mu -> 0+` and recovers the loss only as `mu -> inf`, so termination
    /// is by tolerance. For `alpha* = -inf` the corner form `f = 2 - mu`
    /// is used.
    IncreasingMu,
    /// `f = (alpha* + 2 mu - 2) / mu` on `mu >= 1`; starts convex at large
    /// mu and recovers the loss exactly at `mu = 1`. For `alpha* = -inf`
    /// the corner form `f = (2 mu - 3) / (mu - 1)` on `mu > 1` is used.
    DecreasingMu,
}

/// Evaluate the shape function. Errors when `mu` is outside the variant's
/// domain.
pub fn shape_fn(variant: ShapeFunction, mu: f64, alpha_star: Alpha) -> Result<f64, GncError> {
    let out_of_domain = || GncError::MuOutOfDomain { variant, mu };
    match variant {
        ShapeFunction::IncreasingMu => {
            if !(mu > 0.0) {
                return Err(out_of_domain());
            }
            Ok(if alpha_star.is_neg_inf() {
                2.0 - mu
            } else {
                (alpha_star.value() * mu + 2.0) / (mu + 1.0)
            })
        }
        ShapeFunction::DecreasingMu => {
            if alpha_star.is_neg_inf() {
                if !(mu > 1.0) {
                    return Err(out_of_domain());
                }
                Ok((2.0 * mu - 3.0) / (mu - 1.0))
            } else {
                if !(mu >= 1.0) {
                    return Err(out_of_domain());
                }
                Ok((alpha_star.value() + 2.0 * mu - 2.0) / mu)
            }
        }
    }
}

/// Schedule configuration for a GNC sweep: which shape function to use, how
/// fast to move the control parameter, and when to declare the original
/// loss recovered.
///
/// The decreasing-mu variant is the default because it reaches `alpha*`
/// exactly at `mu = 1`; the increasing-mu variant only recovers the loss in
/// the limit and therefore always terminates by tolerance.
#[derive(Debug, Clone, Copy)]
pub struct GncSchedule {
    pub variant: ShapeFunction,
    /// Multiplicative step of the control parameter per stage (> 1).
    pub update_factor: f64,
    /// Target width of `|f - 2|` at the first stage.
    pub start_gap: f64,
    /// Termination tolerance on `|f - alpha*|` for finite targets.
    pub f_tolerance: f64,
    /// Termination floor on `f` when `alpha* = -inf`; by then the weights
    /// are numerically indistinguishable from the Welsch limit.
    pub f_floor: f64,
    /// Hard cap on the number of stages.
    pub max_stages: usize,
}

impl Default for GncSchedule {
    fn default() -> Self {
        GncSchedule {
            variant: ShapeFunction::DecreasingMu,
            update_factor: 1.4,
            start_gap: 1e-7,
            f_tolerance: 1e-3,
            f_floor: -32.0,
            max_stages: 200,
        }
    }
}

impl GncSchedule {
    pub fn with_variant(variant: ShapeFunction) -> Self {
        GncSchedule {
            variant,
            ..Default::default()
        }
    }

    /// Initial control parameter: the value at which `|f - 2| <= start_gap`.
    pub fn initial_mu(&self, alpha_star: Alpha) -> f64 {
        let gap = self.start_gap;
        match self.variant {
            ShapeFunction::IncreasingMu => {
                if alpha_star.is_neg_inf() {
                    gap
                } else {
                    let spread = 2.0 - alpha_star.value();
                    if spread <= gap {
                        // alpha* = 2: any mu works, f is identically 2.
                        1.0
                    } else {
                        gap / (spread - gap)
                    }
                }
            }
            ShapeFunction::DecreasingMu => {
                if alpha_star.is_neg_inf() {
                    1.0 + 1.0 / gap
                } else {
                    let spread = 2.0 - alpha_star.value();
                    (spread / gap).max(2.0)
                }
            }
        }
    }

    /// Advance the control parameter one stage toward `alpha*`.
    pub fn next_mu(&self, mu: f64, alpha_star: Alpha) -> f64 {
        match self.variant {
            ShapeFunction::IncreasingMu => mu * self.update_factor,
            ShapeFunction::DecreasingMu => {
                if alpha_star.is_neg_inf() {
                    // Clamp at the point where f hits the floor; going all
                    // the way to mu = 1 would push f to -inf.
                    let floor_mu = 1.0 + 1.0 / (2.0 - self.f_floor);
                    (mu / self.update_factor).max(floor_mu)
                } else {
                    (mu / self.update_factor).max(1.0)
                }
            }
        }
    }

    /// Has the schedule recovered the target loss at this shape value?
    pub fn is_terminal(&self, f: f64, alpha_star: Alpha) -> bool {
        if alpha_star.is_neg_inf() {
            f <= self.f_floor
        } else {
            (f - alpha_star.value()).abs() <= self.f_tolerance
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn increasing_mu_examples() {
        let a = Alpha::new(-2.0).unwrap();
        // mu -> 0+ drives f to 2.
        assert!((shape_fn(ShapeFunction::IncreasingMu, 1e-9, a).unwrap() - 2.0).abs() < 1e-8);
        // Direct evaluation at mu = 1.
        assert_relative_eq!(shape_fn(ShapeFunction::IncreasingMu, 1.0, a).unwrap(), 0.0);
        // Welsch corner form.
        assert_relative_eq!(
            shape_fn(ShapeFunction::IncreasingMu, 0.5, Alpha::NEG_INF).unwrap(),
            1.5
        );
    }

    #[test]
    fn decreasing_mu_examples() {
        let a0 = Alpha::new(0.0).unwrap();
        // mu = 1 recovers alpha* exactly.
        assert_relative_eq!(shape_fn(ShapeFunction::DecreasingMu, 1.0, a0).unwrap(), 0.0);
        assert_relative_eq!(shape_fn(ShapeFunction::DecreasingMu, 2.0, a0).unwrap(), 1.0);
        // Welsch corner form: f = (2 mu - 3) / (mu - 1).
        assert_relative_eq!(
            shape_fn(ShapeFunction::DecreasingMu, 2.0, Alpha::NEG_INF).unwrap(),
            1.0
        );
        assert!(shape_fn(ShapeFunction::DecreasingMu, 1.001, Alpha::NEG_INF).unwrap() < -900.0);
    }

    #[test]
    fn domain_errors() {
        assert!(shape_fn(ShapeFunction::IncreasingMu, 0.0, Alpha::QUADRATIC).is_err());
        assert!(shape_fn(ShapeFunction::IncreasingMu, -1.0, Alpha::QUADRATIC).is_err());
        assert!(shape_fn(ShapeFunction::DecreasingMu, 0.5, Alpha::QUADRATIC).is_err());
        assert!(shape_fn(ShapeFunction::DecreasingMu, 1.0, Alpha::NEG_INF).is_err());
    }

    #[test]
    fn shape_stays_at_or_below_two() {
        for variant in [ShapeFunction::IncreasingMu, ShapeFunction::DecreasingMu] {
            for alpha in [
                Alpha::QUADRATIC,
                Alpha::new(0.0).unwrap(),
                Alpha::new(-8.0).unwrap(),
                Alpha::NEG_INF,
            ] {
                for i in 0..60 {
                    let mu = match variant {
                        ShapeFunction::IncreasingMu => 1e-6 * 1.7_f64.powi(i),
                        ShapeFunction::DecreasingMu => 1.0 + 1e-6 * 1.7_f64.powi(i),
                    };
                    let f = shape_fn(variant, mu, alpha).unwrap();
                    assert!(f <= 2.0 + 1e-12, "{variant:?} alpha={alpha} mu={mu}: f={f}");
                }
            }
        }
    }

    /// Drives a schedule from start to termination, returning every f.
    fn sweep(schedule: &GncSchedule, alpha: Alpha) -> Vec<f64> {
        let mut mu = schedule.initial_mu(alpha);
        let mut fs = Vec::new();
        for _ in 0..schedule.max_stages {
            let f = shape_fn(schedule.variant, mu, alpha).unwrap();
            fs.push(f);
            if schedule.is_terminal(f, alpha) {
                break;
            }
            mu = schedule.next_mu(mu, alpha);
        }
        fs
    }

    #[test]
    fn schedules_start_convex_and_terminate_at_target() {
        for variant in [ShapeFunction::IncreasingMu, ShapeFunction::DecreasingMu] {
            let schedule = GncSchedule::with_variant(variant);
            for alpha in [
                Alpha::new(1.0).unwrap(),
                Alpha::new(0.0).unwrap(),
                Alpha::new(-2.0).unwrap(),
                Alpha::new(-8.0).unwrap(),
                Alpha::NEG_INF,
            ] {
                let fs = sweep(&schedule, alpha);
                assert!(
                    (fs[0] - 2.0).abs() < 1e-6,
                    "{variant:?} alpha={alpha}: start f = {}",
                    fs[0]
                );
                let last = *fs.last().unwrap();
                if alpha.is_neg_inf() {
                    assert!(last <= -32.0, "{variant:?}: final f = {last}");
                } else {
                    assert!(
                        (last - alpha.value()).abs() < 1e-3,
                        "{variant:?} alpha={alpha}: final f = {last}"
                    );
                }
                assert!(fs.iter().all(|f| *f <= 2.0 + 1e-12));
                assert!(
                    fs.len() < schedule.max_stages,
                    "{variant:?} alpha={alpha} did not terminate"
                );
            }
        }
    }

    #[test]
    fn quadratic_target_terminates_immediately() {
        let schedule = GncSchedule::default();
        let fs = sweep(&schedule, Alpha::QUADRATIC);
        assert_eq!(fs.len(), 1);
        assert_eq!(fs[0], 2.0);
    }

    #[test]
    fn shape_decreases_monotonically_along_the_schedule() {
        for variant in [ShapeFunction::IncreasingMu, ShapeFunction::DecreasingMu] {
            let schedule = GncSchedule::with_variant(variant);
            for alpha in [Alpha::new(-2.0).unwrap(), Alpha::NEG_INF] {
                let fs = sweep(&schedule, alpha);
                for w in fs.windows(2) {
                    assert!(w[1] <= w[0] + 1e-12, "{variant:?} alpha={alpha}: {w:?}");
                }
            }
        }
    }
}
