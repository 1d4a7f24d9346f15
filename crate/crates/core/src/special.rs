//! Special functions: log-beta, the regularized incomplete beta function and
//! its inverse, plus the standard normal helpers used by the distributions.
//!
//! The incomplete beta is evaluated with the modified Lentz continued
//! fraction. For large shape parameters the log prefactor
//! `a ln x + b ln(1-x) - ln B(a, b)` is assembled around the mode with
//! Stirling remainders, which keeps it accurate at `a = b = 5·10⁴`.

use libm::{erfc, lgamma as ln_gamma};
use statrs::function::erf::erfc_inv;

const LN_2PI: f64 = 1.837_877_066_409_345_5;
const CF_MAX_ITER: usize = 20_000;
const CF_EPS: f64 = 1e-16;
const TINY: f64 = 1e-300;
const STIRLING_MIN: f64 = 10.0;

/// Remainder of Stirling's series, `ln Γ(z) - [(z - ½) ln z - z + ½ ln 2π]`.
fn stirling_remainder(z: f64) -> f64 {
    let z2 = z * z;
    (1.0 / 12.0
        - (1.0 / 360.0 - (1.0 / 1260.0 - (1.0 / 1680.0 - 1.0 / (1188.0 * z2)) / z2) / z2) / z2)
        / z
}

pub fn ln_beta(a: f64, b: f64) -> f64 {
    if a >= STIRLING_MIN && b >= STIRLING_MIN {
        let s = a + b;
        0.5 * LN_2PI + (a - 0.5) * a.ln() + (b - 0.5) * b.ln() - (s - 0.5) * s.ln()
            + stirling_remainder(a)
            + stirling_remainder(b)
            - stirling_remainder(s)
    } else {
        ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
    }
}

/// `ln[x^a (1-x)^b / B(a, b)]` for `0 < x < 1`.
fn ln_prefactor(x: f64, a: f64, b: f64) -> f64 {
    if a >= STIRLING_MIN && b >= STIRLING_MIN {
        let s = a + b;
        let x0 = a / s;
        let y0 = b / s;
        let dx = x - x0;
        a * (dx / x0).ln_1p() + b * (-dx / y0).ln_1p() + 0.5 * (a * b / s).ln()
            - 0.5 * LN_2PI
            - (stirling_remainder(a) + stirling_remainder(b) - stirling_remainder(s))
    } else {
        a * x.ln() + b * (-x).ln_1p() - ln_beta(a, b)
    }
}

/// Continued fraction for `I_x(a, b)`; converges fast for `x < (a+1)/(a+b+2)`.
fn beta_continued_fraction(x: f64, a: f64, b: f64) -> f64 {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < CF_EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)`. Callers validate the domain.
pub fn inc_beta(x: f64, a: f64, b: f64) -> f64 {
    debug_assert!(a > 0.0 && b > 0.0);
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    if x < (a + 1.0) / (a + b + 2.0) {
        ln_prefactor(x, a, b).exp() * beta_continued_fraction(x, a, b) / a
    } else {
        let y = 1.0 - x;
        1.0 - ln_prefactor(y, b, a).exp() * beta_continued_fraction(y, b, a) / b
    }
}

/// Beta(a, b) density.
pub fn beta_density(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        let at_zero = x <= 0.0;
        let shape = if at_zero { a } else { b };
        return match shape.partial_cmp(&1.0) {
            Some(std::cmp::Ordering::Less) => f64::INFINITY,
            Some(std::cmp::Ordering::Equal) => (-ln_beta(a, b)).exp(),
            _ => 0.0,
        };
    }
    (ln_prefactor(x, a, b) - x.ln() - (-x).ln_1p()).exp()
}

/// Inverse of `I_x(a, b)` in `x`: safeguarded Newton inside a shrinking bracket.
pub fn inv_inc_beta(p: f64, a: f64, b: f64) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let mut x = (a / (a + b)).clamp(1e-12, 1.0 - 1e-12);
    for _ in 0..300 {
        let f = inc_beta(x, a, b) - p;
        if f == 0.0 {
            return x;
        }
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let dens = beta_density(x, a, b);
        let newton = if dens.is_finite() && dens > 0.0 {
            x - f / dens
        } else {
            f64::NAN
        };
        let next = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - x).abs() <= 4.0 * f64::EPSILON * x.max(f64::MIN_POSITIVE) || hi - lo <= 0.0 {
            return next;
        }
        x = next;
    }
    x
}

pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

pub fn std_normal_quantile(p: f64) -> f64 {
    let z = -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p);
    if !z.is_finite() {
        return z;
    }
    // One Newton step against the more accurate cdf.
    let d = std_normal_density(z);
    if d > 0.0 {
        z - (std_normal_cdf(z) - p) / d
    } else {
        z
    }
}

pub fn std_normal_density(z: f64) -> f64 {
    (-0.5 * z * z - 0.5 * LN_2PI).exp()
}
