//! Per-stage weight rules and the outlier process of the surrogate loss.

use crate::loss::{weight_adaptive, Alpha};

/// Weight of the GNC surrogate at shape value `f`: the adaptive weight with
/// `f` in place of the shape parameter. `f` may be `-inf`.
pub fn gnc_weight(eps: f64, f: f64) -> f64 {
    let alpha = if f == f64::NEG_INFINITY {
        Alpha::NEG_INF
    } else {
        Alpha::new(f).expect("shape value must be <= 2")
    };
    weight_adaptive(eps, alpha)
}

/// Closed-form outlier process of the surrogate loss: the penalty
/// `Phi(w)` such that `min_w 1/2 w eps^2 + Phi(w)` recovers the surrogate
/// and its minimizer recovers [`gnc_weight`].
///
/// The general formula degenerates to 0/0 at `f = 0` and `f = 2`; those
/// use their symbolic limits (`w - 1 - log w` and identically zero).
pub fn outlier_process_agnc(w: f64, f: f64) -> f64 {
    debug_assert!(w > 0.0 && w <= 1.0, "weight {w} outside (0, 1]");
    debug_assert!(f <= 2.0);
    if f == 2.0 {
        return 0.0;
    }
    if f == 0.0 {
        return w - 1.0 - w.ln();
    }
    let am2 = (f - 2.0).abs();
    am2 / f * (w.powf(f / (f - 2.0)) - 1.0) - w * am2 / 2.0 * (w.powf(2.0 / (f - 2.0)) - 1.0)
}

/// Geman-McClure weight under the GNC surrogate:
/// `w = (mu c^2 / (eps^2 + mu c^2))^2`. Large `mu` is the convex limit; the
/// original kernel is recovered at `mu = 1`.
pub fn weight_gnc_gm(eps: f64, mu: f64, c: f64) -> f64 {
    debug_assert!(mu > 0.0 && c > 0.0);
    let mc2 = mu * c * c;
    let ratio = mc2 / (eps * eps + mc2);
    ratio * ratio
}

/// Truncated-least-squares weight under the GNC surrogate. Inside
/// `eps^2 <= mu/(mu+1) c^2` the weight is one, beyond `(mu+1)/mu c^2` it is
/// zero, and in between it interpolates; increasing `mu` sharpens the
/// transition until the weights are binary.
pub fn weight_gnc_tls(eps: f64, mu: f64, cbar: f64) -> f64 {
    debug_assert!(mu > 0.0 && cbar > 0.0);
    let e2 = eps * eps;
    let c2 = cbar * cbar;
    if e2 <= mu / (mu + 1.0) * c2 {
        1.0
    } else if e2 >= (mu + 1.0) / mu * c2 {
        0.0
    } else {
        cbar * (mu * (mu + 1.0)).sqrt() / eps - mu
    }
}
