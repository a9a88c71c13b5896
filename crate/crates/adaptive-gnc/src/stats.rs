//! Small numerics toolbox: gamma functions, chi-square quantiles, and
//! Gaussian sampling helpers shared by the loss and experiment layers.

use rand::Rng;

/// Natural log of the gamma function (Lanczos approximation, g=7, n=9).
///
/// Accurate to ~1e-13 over the positive reals, which is well below every
/// tolerance used downstream.
pub fn ln_gamma(x: f64) -> f64 {
    const COEFFS: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    assert!(x > 0.0, "ln_gamma requires x > 0, got {x}");
    if x < 0.5 {
        // Reflection formula keeps the Lanczos series in its sweet spot.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEFFS[0];
    for (i, &c) in COEFFS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Gamma(n/2) for positive integer n, computed exactly by recursion from
/// Gamma(1/2) = sqrt(pi) and Gamma(1) = 1.
pub fn gamma_half_integer(n: u32) -> f64 {
    assert!(n >= 1, "gamma_half_integer requires n >= 1");
    let mut value = if n % 2 == 0 {
        1.0 // Gamma(1)
    } else {
        std::f64::consts::PI.sqrt() // Gamma(1/2)
    };
    let mut arg = if n % 2 == 0 { 1.0 } else { 0.5 };
    while 2.0 * arg < n as f64 {
        value *= arg;
        arg += 1.0;
    }
    value
}

/// Regularized lower incomplete gamma P(s, x).
///
/// Series expansion for x < s + 1, Lentz continued fraction for the
/// complement otherwise (the usual split).
pub fn gamma_lower_regularized(s: f64, x: f64) -> f64 {
    assert!(s > 0.0 && x >= 0.0, "invalid arguments s={s}, x={x}");
    if x == 0.0 {
        return 0.0;
    }
    if x < s + 1.0 {
        // P(s,x) = x^s e^-x / Gamma(s) * sum x^n / (s (s+1) ... (s+n))
        let mut term = 1.0 / s;
        let mut sum = term;
        let mut denom = s;
        for _ in 0..500 {
            denom += 1.0;
            term *= x / denom;
            sum += term;
            if term.abs() < sum.abs() * 1e-16 {
                break;
            }
        }
        sum * (s * x.ln() - x - ln_gamma(s)).exp()
    } else {
        // Q(s,x) via modified Lentz continued fraction, P = 1 - Q.
        let tiny = 1e-300;
        let mut b = x + 1.0 - s;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..500 {
            let an = -(i as f64) * (i as f64 - s);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        let q = (s * x.ln() - x - ln_gamma(s)).exp() * h;
        1.0 - q
    }
}

/// CDF of the chi-square distribution with `dof` degrees of freedom.
pub fn chi2_cdf(dof: u32, x: f64) -> f64 {
    assert!(dof >= 1);
    if x <= 0.0 {
        return 0.0;
    }
    gamma_lower_regularized(dof as f64 / 2.0, x / 2.0)
}

/// Quantile (inverse CDF) of the chi-square distribution, by bisection.
///
/// Bisection is slow but bulletproof; this is called a handful of times per
/// benchmark run, never in an inner loop.
pub fn chi2_quantile(dof: u32, p: f64) -> f64 {
    assert!((0.0..1.0).contains(&p), "p must be in [0, 1), got {p}");
    if p == 0.0 {
        return 0.0;
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while chi2_cdf(dof, hi) < p {
        hi *= 2.0;
        assert!(hi < 1e12, "chi2_quantile failed to bracket p={p}");
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if chi2_cdf(dof, mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 * hi.max(1.0) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// One standard normal draw via the Marsaglia polar method.
pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random::<f64>() * 2.0 - 1.0;
        let v: f64 = rng.random::<f64>() * 2.0 - 1.0;
        let s = u * u + v * v;
        if s > 0.0 && s < 1.0 {
            return u * (-2.0 * s.ln() / s).sqrt();
        }
    }
}
