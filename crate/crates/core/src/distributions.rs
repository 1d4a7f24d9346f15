//! Population models with cdf, quantile, density, inverse-CDF sampling and
//! the moment bundle the asymptotic formulas consume.

use std::f64::consts::FRAC_2_PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature;
use crate::special::{
    beta_density, inc_beta, inv_inc_beta, ln_beta, std_normal_cdf, std_normal_density,
    std_normal_quantile,
};

const ETA_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Distribution {
    Uniform01,
    Normal { mu: f64, sigma: f64 },
    /// `F(x) = 1 - (alpha / x)^beta` for `x > alpha`.
    Pareto { alpha: f64, beta: f64 },
    /// Beta(alpha, alpha).
    BetaSym { alpha: f64 },
    /// `scale · T_nu + shift`.
    ScaledT { nu: f64, scale: f64, shift: f64 },
}

/// Moments of a population about its mean and median. Infinite moments are
/// reported as `f64::INFINITY`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentBundle {
    pub mean: f64,
    pub median: f64,
    pub variance: f64,
    /// `E|X - median|`.
    pub eta: f64,
    pub density_at_median: f64,
    #[serde(skip)]
    distribution: Distribution,
}

impl MomentBundle {
    /// `f(F⁻¹(q))`.
    pub fn density_at(&self, q: f64) -> Result<f64> {
        let x = self.distribution.quantile(q)?;
        Ok(self.distribution.pdf(x))
    }

    pub fn has_finite_variance(&self) -> bool {
        self.variance.is_finite()
    }
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::Domain(format!("{name} must be positive and finite (got {v})")))
    }
}

impl Distribution {
    pub fn normal(mu: f64, sigma: f64) -> Result<Self> {
        if !mu.is_finite() {
            return Err(Error::Domain(format!("mu must be finite (got {mu})")));
        }
        Ok(Self::Normal {
            mu,
            sigma: positive("sigma", sigma)?,
        })
    }

    pub fn pareto(alpha: f64, beta: f64) -> Result<Self> {
        Ok(Self::Pareto {
            alpha: positive("alpha", alpha)?,
            beta: positive("beta", beta)?,
        })
    }

    pub fn beta_sym(alpha: f64) -> Result<Self> {
        Ok(Self::BetaSym {
            alpha: positive("alpha", alpha)?,
        })
    }

    pub fn scaled_t(nu: f64, scale: f64, shift: f64) -> Result<Self> {
        if !shift.is_finite() {
            return Err(Error::Domain(format!("shift must be finite (got {shift})")));
        }
        Ok(Self::ScaledT {
            nu: positive("nu", nu)?,
            scale: positive("scale", scale)?,
            shift,
        })
    }

    /// Open support `(lo, hi)`.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            Self::Uniform01 | Self::BetaSym { .. } => (0.0, 1.0),
            Self::Pareto { alpha, .. } => (alpha, f64::INFINITY),
            Self::Normal { .. } | Self::ScaledT { .. } => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            Self::Uniform01 => x.clamp(0.0, 1.0),
            Self::Normal { mu, sigma } => std_normal_cdf((x - mu) / sigma),
            Self::Pareto { alpha, beta } => {
                if x <= alpha {
                    0.0
                } else {
                    -(beta * (alpha / x).ln()).exp_m1()
                }
            }
            Self::BetaSym { alpha } => inc_beta(x, alpha, alpha),
            Self::ScaledT { nu, scale, shift } => t_cdf((x - shift) / scale, nu),
        }
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Domain(format!("quantile needs p in (0, 1) (got {p})")));
        }
        Ok(self.quantile_unchecked(p))
    }

    fn quantile_unchecked(&self, p: f64) -> f64 {
        match *self {
            Self::Uniform01 => p,
            Self::Normal { mu, sigma } => mu + sigma * std_normal_quantile(p),
            Self::Pareto { alpha, beta } => alpha * (-(-p).ln_1p() / beta).exp(),
            Self::BetaSym { alpha } => inv_inc_beta(p, alpha, alpha),
            Self::ScaledT { nu, scale, shift } => shift + scale * t_quantile(p, nu),
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match *self {
            Self::Uniform01 => {
                if (0.0..=1.0).contains(&x) {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Normal { mu, sigma } => std_normal_density((x - mu) / sigma) / sigma,
            Self::Pareto { alpha, beta } => {
                if x < alpha {
                    0.0
                } else {
                    beta / x * (beta * (alpha / x).ln()).exp()
                }
            }
            Self::BetaSym { alpha } => beta_density(x, alpha, alpha),
            Self::ScaledT { nu, scale, shift } => t_density((x - shift) / scale, nu) / scale,
        }
    }

    pub fn median(&self) -> f64 {
        match *self {
            Self::Uniform01 | Self::BetaSym { .. } => 0.5,
            Self::Normal { mu, .. } => mu,
            Self::Pareto { alpha, beta } => alpha * 2f64.powf(1.0 / beta),
            Self::ScaledT { shift, .. } => shift,
        }
    }

    pub fn moments(&self) -> MomentBundle {
        let median = self.median();
        let (mean, variance, eta) = match *self {
            Self::Uniform01 => (0.5, 1.0 / 12.0, 0.25),
            Self::Normal { mu, sigma } => (mu, sigma * sigma, sigma * FRAC_2_PI.sqrt()),
            Self::Pareto { alpha, beta } => {
                let mean = if beta <= 1.0 {
                    f64::INFINITY
                } else {
                    alpha * beta / (beta - 1.0)
                };
                let variance = if beta <= 2.0 {
                    f64::INFINITY
                } else {
                    alpha * alpha * beta / ((beta - 1.0).powi(2) * (beta - 2.0))
                };
                // E|X - median| = (2^{1/β} - 1) · E X
                let eta = (2f64.powf(1.0 / beta) - 1.0) * mean;
                (mean, variance, eta)
            }
            Self::BetaSym { alpha } => (0.5, 1.0 / (4.0 * (2.0 * alpha + 1.0)), self.eta_by_quadrature()),
            Self::ScaledT { nu, scale, shift } => {
                let b = ln_beta(nu / 2.0, 0.5).exp();
                let mean = if nu <= 1.0 { f64::INFINITY } else { shift };
                let variance = if nu <= 2.0 {
                    f64::INFINITY
                } else {
                    scale * scale * nu / (nu - 2.0)
                };
                let eta = if nu <= 1.0 {
                    f64::INFINITY
                } else {
                    scale * 2.0 * nu.sqrt() / ((nu - 1.0) * b)
                };
                (mean, variance, eta)
            }
        };
        MomentBundle {
            mean,
            median,
            variance,
            eta,
            density_at_median: self.pdf(median),
            distribution: *self,
        }
    }

    /// `E|X - median|` as `∫_{-∞}^{m} F + ∫_m^{∞} (1 - F)`.
    pub fn eta_by_quadrature(&self) -> f64 {
        let m = self.median();
        let (lo, hi) = self.support();
        let lower = if lo.is_finite() {
            quadrature::integrate(|x| self.cdf(x), lo, m, ETA_TOL)
        } else {
            quadrature::integrate_lower_tail(|x| self.cdf(x), m, ETA_TOL)
        };
        let upper = if hi.is_finite() {
            quadrature::integrate(|x| 1.0 - self.cdf(x), m, hi, ETA_TOL)
        } else {
            quadrature::integrate_upper_tail(|x| self.survival(x), m, ETA_TOL)
        };
        lower + upper
    }

    fn survival(&self, x: f64) -> f64 {
        match *self {
            Self::Normal { mu, sigma } => std_normal_cdf((mu - x) / sigma),
            Self::Pareto { alpha, beta } => {
                if x <= alpha {
                    1.0
                } else {
                    (beta * (alpha / x).ln()).exp()
                }
            }
            Self::ScaledT { nu, scale, shift } => t_cdf((shift - x) / scale, nu),
            _ => 1.0 - self.cdf(x),
        }
    }

    /// One inverse-CDF draw; consumes exactly one uniform.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.quantile_unchecked(open_unit(rng))
    }

    pub fn sample_n<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n];
        self.fill(rng, &mut out);
        out
    }

    pub fn fill<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        for x in out.iter_mut() {
            *x = self.sample(rng);
        }
    }
}

/// Uniform on the open interval (0, 1) from the top 53 bits of one `u64`.
pub fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

fn t_cdf(t: f64, nu: f64) -> f64 {
    let x = nu / (nu + t * t);
    let tail = 0.5 * inc_beta(x, nu / 2.0, 0.5);
    if t > 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

fn t_quantile(p: f64, nu: f64) -> f64 {
    if p == 0.5 {
        return 0.0;
    }
    let tail = p.min(1.0 - p);
    let x = inv_inc_beta(2.0 * tail, nu / 2.0, 0.5);
    let t = (nu * (1.0 - x) / x).sqrt();
    if p < 0.5 {
        -t
    } else {
        t
    }
}

fn t_density(t: f64, nu: f64) -> f64 {
    (-(nu + 1.0) / 2.0 * (t * t / nu).ln_1p() - 0.5 * nu.ln() - ln_beta(nu / 2.0, 0.5)).exp()
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Self::Uniform01 => write!(f, "uniform"),
            Self::Normal { mu, sigma } => write!(f, "normal:{mu},{sigma}"),
            Self::Pareto { alpha, beta } => write!(f, "pareto:{alpha},{beta}"),
            Self::BetaSym { alpha } => write!(f, "beta:{alpha}"),
            Self::ScaledT { nu, scale, shift } => write!(f, "t:{nu},{scale},{shift}"),
        }
    }
}

/// Literals: `uniform`, `normal:MU,SIGMA`, `pareto:ALPHA,BETA`, `beta:ALPHA`,
/// `t:NU,SCALE,SHIFT` (`t:NU` alone means unit scale, zero shift).
impl FromStr for Distribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::ParseDistribution(s.to_string());
        let (family, args) = match s.trim().split_once(':') {
            Some((f, a)) => (f.trim(), a),
            None => (s.trim(), ""),
        };
        let nums = if args.trim().is_empty() {
            Vec::new()
        } else {
            args.split(',')
                .map(|t| t.trim().parse::<f64>().map_err(|_| bad()))
                .collect::<Result<Vec<_>>>()?
        };
        match (family.to_ascii_lowercase().as_str(), nums.as_slice()) {
            ("uniform", []) => Ok(Self::Uniform01),
            ("normal", []) => Self::normal(0.0, 1.0),
            ("normal", &[mu, sigma]) => Self::normal(mu, sigma),
            ("pareto", &[alpha, beta]) => Self::pareto(alpha, beta),
            ("beta", &[alpha]) => Self::beta_sym(alpha),
            ("t", &[nu]) => Self::scaled_t(nu, 1.0, 0.0),
            ("t", &[nu, scale, shift]) => Self::scaled_t(nu, scale, shift),
            _ => Err(bad()),
        }
    }
}
