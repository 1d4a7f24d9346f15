//! Exact and large-`b` laws of the remedian.
//!
//! The exact side is the rank-quantile transform `Ψ_b^{(k)}`, the `k`-fold
//! composition of the Beta(m+1, m+1) CDF with `b = 2m + 1`: a `(k, b)`
//! remedian of `b^k` i.i.d. draws from `F` has CDF `Ψ_b^{(k)} ∘ F`.
//!
//! The asymptotic side is the joint normal limit of the standardized
//! (mean, median, remedian, remedian rank) vector, the efficiencies it
//! implies, and the covariance predictor for `ℓ` remedians fed by the order
//! statistics of a shared front buffer.

use std::f64::consts::{FRAC_2_PI, FRAC_PI_2, PI};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::distributions::Distribution;
use crate::error::{Error, Result};
use crate::multi::{ptilde, validate_indices};
use crate::quadrature;
use crate::sketch::checked_capacity;
use crate::special::{beta_density, inc_beta, ln_beta};

const PIBAR_TOL: f64 = 1e-10;

/// Regularized incomplete beta `I_x(a, b)`, the Beta(a, b) CDF.
pub fn beta_cdf(x: f64, a: f64, b: f64) -> Result<f64> {
    check_beta_domain(x, a, b)?;
    Ok(inc_beta(x, a, b))
}

/// Beta(a, b) density.
pub fn beta_pdf(x: f64, a: f64, b: f64) -> Result<f64> {
    check_beta_domain(x, a, b)?;
    Ok(beta_density(x, a, b))
}

fn check_beta_domain(x: f64, a: f64, b: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("x must lie in [0, 1] (got {x})")));
    }
    if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
        return Err(Error::Domain(format!("shapes must be positive (got {a}, {b})")));
    }
    Ok(())
}

/// Parameters of `Ψ_b^{(k)}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PsiParams {
    pub width: usize,
    pub depth: usize,
}

impl PsiParams {
    pub fn new(width: usize, depth: usize) -> Result<Self> {
        if width < 3 || width % 2 == 0 {
            return Err(Error::InvalidWidth(width));
        }
        Ok(Self { width, depth })
    }

    /// `m + 1` for `b = 2m + 1`.
    fn shape(&self) -> f64 {
        (self.width / 2 + 1) as f64
    }

    pub fn eval(&self, x: f64) -> f64 {
        let a = self.shape();
        (0..self.depth).fold(x, |y, _| inc_beta(y, a, a))
    }

    /// Derivative of `Ψ_b^{(k)}` by the chain rule.
    pub fn derivative(&self, x: f64) -> f64 {
        let a = self.shape();
        let mut y = x;
        let mut slope = 1.0;
        for _ in 0..self.depth {
            slope *= beta_density(y, a, a);
            y = inc_beta(y, a, a);
        }
        slope
    }
}

/// `Ψ_b^{(k)}(x)`.
pub fn psi(x: f64, width: usize, depth: usize) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("psi needs x in [0, 1] (got {x})")));
    }
    Ok(PsiParams::new(width, depth)?.eval(x))
}

/// `G_{k,b}(x) = Ψ_b^{(k)}(F(x))`, the exact CDF of the final estimate.
pub fn remedian_cdf(x: f64, dist: &Distribution, width: usize, depth: usize) -> Result<f64> {
    Ok(PsiParams::new(width, depth)?.eval(dist.cdf(x)))
}

/// `θ_b = b! / (2^{2m} m!²)`, the Beta(m+1, m+1) density at ½.
pub fn theta_b(width: usize) -> Result<f64> {
    if width < 3 || width % 2 == 0 {
        return Err(Error::InvalidWidth(width));
    }
    let m = (width / 2) as f64;
    Ok((-ln_beta(m + 1.0, m + 1.0) - 2.0 * m * std::f64::consts::LN_2).exp())
}

/// `(⌈b/2⌉ / b)^k`.
pub fn breakdown_point(depth: usize, width: usize) -> f64 {
    let ratio = width.div_ceil(2) as f64 / width as f64;
    ratio.powi(depth as i32)
}

/// `Π_j (⌈b_j/2⌉ / b_j)^{k_j}` for a chain of remedians.
pub fn chain_breakdown_point(params: &[(usize, usize)]) -> f64 {
    params.iter().map(|&(k, b)| breakdown_point(k, b)).product()
}

/// `τ_k² = (π/2)^{k-1}`.
pub fn tau_sq(depth: usize) -> f64 {
    FRAC_PI_2.powi(depth as i32 - 1)
}

/// `p_k = (2/π)^{k-1} = 1 / τ_k²`.
fn p_k(depth: usize) -> f64 {
    FRAC_2_PI.powi(depth as i32 - 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RankMoments {
    /// Large-`b` approximation of `E|R - h|`, `h = (b^k + 1) / 2`.
    pub mean_abs_dev: f64,
    /// Large-`b` approximation of `Var|R - h|`.
    pub var_abs_dev: f64,
}

pub fn rank_moments(depth: usize, width: usize) -> RankMoments {
    let n = (width as f64).powi(depth as i32);
    let excess = tau_sq(depth) - 1.0;
    RankMoments {
        mean_abs_dev: (n * excess / (2.0 * PI)).sqrt(),
        var_abs_dev: n * (1.0 - FRAC_2_PI) / 4.0 * excess,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Coordinate {
    Mean,
    Median,
    Remedian,
    RemedianRank,
}

/// Limiting covariance (or correlation) of
/// `b^{k/2} (X̄ - μ, X_(h) - μ̄, X_(R) - μ̄, R/b^k - ½)`.
///
/// Populations without a finite variance drop the mean coordinate, leaving
/// the 3 × 3 block of the last three.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadCovariance {
    pub coordinates: Vec<Coordinate>,
    pub matrix: DMatrix<f64>,
}

impl QuadCovariance {
    pub fn mean_available(&self) -> bool {
        self.coordinates.first() == Some(&Coordinate::Mean)
    }

    pub fn get(&self, a: Coordinate, b: Coordinate) -> Option<f64> {
        let i = self.coordinates.iter().position(|&c| c == a)?;
        let j = self.coordinates.iter().position(|&c| c == b)?;
        Some(self.matrix[(i, j)])
    }
}

fn drop_mean(full: DMatrix<f64>, finite: bool) -> QuadCovariance {
    use Coordinate::*;
    if finite {
        QuadCovariance {
            coordinates: vec![Mean, Median, Remedian, RemedianRank],
            matrix: full,
        }
    } else {
        QuadCovariance {
            coordinates: vec![Median, Remedian, RemedianRank],
            matrix: full.view((1, 1), (3, 3)).into_owned(),
        }
    }
}

/// `D Σ D` with `Σ = [[σ², η, η, 0], [η, 1, 1, 0], [η, 1, τ², τ̄²], [0, 0, τ̄², τ̄²]]`
/// and `D = diag(1, 2f(μ̄), 2f(μ̄), 2)⁻¹`.
pub fn quad_covariance(dist: &Distribution, depth: usize) -> QuadCovariance {
    let m = dist.moments();
    let finite = m.variance.is_finite();
    let (var, eta) = if finite { (m.variance, m.eta) } else { (0.0, 0.0) };
    let tau2 = tau_sq(depth);
    let tbar2 = tau2 - 1.0;
    #[rustfmt::skip]
    let sigma = DMatrix::from_row_slice(4, 4, &[
        var, eta, eta,  0.0,
        eta, 1.0, 1.0,  0.0,
        eta, 1.0, tau2, tbar2,
        0.0, 0.0, tbar2, tbar2,
    ]);
    let f2 = 2.0 * m.density_at_median;
    let d = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0 / f2, 1.0 / f2, 0.5]));
    drop_mean(&d * sigma * &d, finite)
}

/// Limiting correlation matrix `P_k` with `p_k = (2/π)^{k-1}`.
pub fn correlation_matrix(dist: &Distribution, depth: usize) -> QuadCovariance {
    let m = dist.moments();
    let finite = m.variance.is_finite();
    let r = if finite { m.eta / m.variance.sqrt() } else { 0.0 };
    let p = p_k(depth);
    let sp = p.sqrt();
    let sq = (1.0 - p).max(0.0).sqrt();
    #[rustfmt::skip]
    let full = DMatrix::from_row_slice(4, 4, &[
        1.0,    r,      r * sp, 0.0,
        r,      1.0,    sp,     0.0,
        r * sp, sp,     1.0,    sq,
        0.0,    0.0,    sq,     1.0,
    ]);
    drop_mean(full, finite)
}

/// Limiting variances of `b^{k/2}` times (remedian − median),
/// (median − mean) − (μ̄ − μ) and (remedian − mean) − (μ̄ − μ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LocationDifferences {
    pub remedian_minus_median: f64,
    /// `None` when the population variance is infinite.
    pub median_minus_mean: Option<f64>,
    pub remedian_minus_mean: Option<f64>,
    /// `(η - ι/2)²`, the floor of the two mean-based variances.
    pub floor: Option<f64>,
}

pub fn locdiff_variances(dist: &Distribution, depth: usize) -> LocationDifferences {
    let m = dist.moments();
    let iota = 1.0 / m.density_at_median;
    let tau2 = tau_sq(depth);
    let remedian_minus_median = iota * iota * (tau2 - 1.0) / 4.0;
    if !m.variance.is_finite() {
        return LocationDifferences {
            remedian_minus_median,
            median_minus_mean: None,
            remedian_minus_mean: None,
            floor: None,
        };
    }
    let base = m.variance - iota * m.eta;
    LocationDifferences {
        remedian_minus_median,
        median_minus_mean: Some(base + iota * iota / 4.0),
        remedian_minus_mean: Some(base + iota * iota * tau2 / 4.0),
        floor: Some((m.eta - iota / 2.0).powi(2)),
    }
}

/// Efficiency of the remedian relative to the sample median: `(2/π)^{k-1}`.
pub fn are_remedian_vs_median(depth: usize) -> f64 {
    p_k(depth)
}

/// Efficiency of the remedian relative to the sample mean:
/// `4 (2/π)^{k-1} f(μ̄)² σ²` (infinite when σ² is).
pub fn are_remedian_vs_mean(dist: &Distribution, depth: usize) -> f64 {
    let m = dist.moments();
    4.0 * p_k(depth) * m.density_at_median.powi(2) * m.variance
}

/// Symmetric families with closed-form efficiencies against the mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum SymmetricFamily {
    Beta { alpha: f64 },
    /// Scaled and shifted t; the efficiency does not depend on scale or shift.
    StudentT { nu: f64 },
    Normal,
}

pub fn are_examples(family: SymmetricFamily, depth: usize) -> Result<f64> {
    let p = p_k(depth);
    match family {
        SymmetricFamily::Beta { alpha } if alpha > 0.0 => {
            let ln_b = ln_beta(alpha, alpha);
            Ok(p / ((alpha - 1.0) * 16f64.ln() + (2.0 * alpha + 1.0).ln() + 2.0 * ln_b).exp())
        }
        SymmetricFamily::StudentT { nu } if nu > 2.0 => {
            let ln_b = ln_beta(nu / 2.0, 0.5);
            Ok(4.0 * p / ((nu - 2.0) * (2.0 * ln_b).exp()))
        }
        SymmetricFamily::Normal => Ok(FRAC_2_PI.powi(depth as i32)),
        other => Err(Error::Domain(format!("{other:?} outside the finite-variance range"))),
    }
}

/// `Σ_{j,l} = π̃_{j,l} - p̃_j p̃_l` after checking that `π̃` is a feasible
/// matrix of pairwise joint probabilities with marginals `p̃`.
pub fn component_sigma(p: &[f64], joint: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let l = p.len();
    if joint.nrows() != l || joint.ncols() != l {
        return Err(Error::Infeasible(format!(
            "joint matrix is {}×{}, expected {l}×{l}",
            joint.nrows(),
            joint.ncols()
        )));
    }
    const SLACK: f64 = 1e-12;
    for (j, &pj) in p.iter().enumerate() {
        if !(pj > 0.0 && pj < 1.0) {
            return Err(Error::Infeasible(format!("p[{j}] = {pj} outside (0, 1)")));
        }
        if (joint[(j, j)] - pj).abs() > SLACK {
            return Err(Error::Infeasible(format!("joint[{j},{j}] must equal p[{j}]")));
        }
        for (l_, &pl) in p.iter().enumerate().skip(j + 1) {
            let v = joint[(j, l_)];
            if (v - joint[(l_, j)]).abs() > SLACK {
                return Err(Error::Infeasible(format!("joint not symmetric at ({j},{l_})")));
            }
            let lo = (pj + pl - 1.0).max(0.0);
            let hi = pj.min(pl);
            if v < lo - SLACK || v > hi + SLACK {
                return Err(Error::Infeasible(format!(
                    "joint[{j},{l_}] = {v} outside Fréchet bounds [{lo}, {hi}]"
                )));
            }
        }
    }
    Ok(DMatrix::from_fn(l, l, |j, k| joint[(j, k)] - p[j] * p[k]))
}

/// `Pr(Y₁ ≤ p_low, Y₁ + Y₂ ≤ p_high)` for
/// `Y ~ Dirichlet(K_low, K_high - K_low, N + 1 - K_high)`: the chance that the
/// `K_low`-th and `K_high`-th of `N` uniforms fall below `p_low` and `p_high`.
///
/// With `K_low == K_high` this is the marginal `B_{K,N}(min(p_low, p_high))`.
pub fn dirichlet_pibar(k_low: usize, k_high: usize, n: usize, p_low: f64, p_high: f64) -> Result<f64> {
    if !(1 <= k_low && k_low <= k_high && k_high <= n) {
        return Err(Error::Domain(format!(
            "need 1 ≤ K_low ≤ K_high ≤ N (got {k_low}, {k_high}, {n})"
        )));
    }
    for p in [p_low, p_high] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Domain(format!("probability {p} outside [0, 1]")));
        }
    }
    let a1 = k_low as f64;
    let rest = (n + 1 - k_low) as f64;
    if k_low == k_high {
        return Ok(inc_beta(p_low.min(p_high), a1, rest));
    }
    let a2 = (k_high - k_low) as f64;
    let a3 = (n + 1 - k_high) as f64;
    let upper = p_low.min(p_high);
    Ok(quadrature::integrate(
        |y| {
            let z = ((p_high - y) / (1.0 - y)).clamp(0.0, 1.0);
            beta_density(y, a1, rest) * inc_beta(z, a2, a3)
        },
        0.0,
        upper,
        PIBAR_TOL,
    ))
}

/// `Pr(Z₁ ≤ 0, Z₂ ≤ 0)` for standard bivariate normal with correlation `ρ`.
pub fn gaussian_orthant(rho: f64) -> f64 {
    0.25 + rho.asin() / (2.0 * PI)
}

/// `τ_k² D Σ D` with `D = diag(1 / h_j)`: the predicted covariance of
/// `b^{k/2}(Y - μ)` for component-wise remedians.
pub fn component_remedian_covariance(densities: &[f64], sigma: &DMatrix<f64>, depth: usize) -> DMatrix<f64> {
    let d = DMatrix::from_diagonal(&DVector::from_iterator(
        densities.len(),
        densities.iter().map(|h| 1.0 / h),
    ));
    &d * sigma * &d * tau_sq(depth)
}

/// `r ↦ (2/π) asin r` applied `levels` times: the correlation between the
/// medians of `b` i.i.d. bivariate-normal pairs with correlation `r`, as
/// `b → ∞`, iterated up the remedian's rows.
pub fn iterated_arcsine(r: f64, levels: usize) -> f64 {
    (0..levels).fold(r, |r, _| FRAC_2_PI * r.clamp(-1.0, 1.0).asin())
}

/// Keeps the diagonal of a `k`-row covariance prediction whose correlations
/// are those of a single row, and pushes each correlation through
/// [`iterated_arcsine`] for the remaining `k - 1` rows.
pub fn arcsine_iterated_covariance(single_row_correlated: &DMatrix<f64>, depth: usize) -> DMatrix<f64> {
    let corr = covariance_to_correlation(single_row_correlated);
    let n = corr.nrows();
    DMatrix::from_fn(n, n, |i, j| {
        let r = if i == j { 1.0 } else { iterated_arcsine(corr[(i, j)], depth.saturating_sub(1)) };
        r * (single_row_correlated[(i, i)] * single_row_correlated[(j, j)]).sqrt()
    })
}

/// Predicted covariance of `ℓ` remedians fed the `K_j`-th order statistics of
/// a shared size-`N` buffer.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultiCovariance {
    pub ptilde: Vec<f64>,
    /// `μ̃_j = F⁻¹(p̃_j)`.
    pub quantiles: Vec<f64>,
    /// `β_{K_j,N}(p̃_j) f(μ̃_j)`, the density of the buffered statistic at μ̃_j.
    pub scale: Vec<f64>,
    pub pibar: DMatrix<f64>,
    pub sigma: DMatrix<f64>,
    /// Limiting covariance of `b^{k/2}(estimates - μ̃)`.
    pub covariance: DMatrix<f64>,
    /// `covariance / b^k`, the implied covariance of the raw estimates.
    pub finite_scale: DMatrix<f64>,
    /// Same diagonal as `covariance`, with cross-correlations propagated
    /// row by row through [`iterated_arcsine`].
    pub iterated_covariance: DMatrix<f64>,
}

pub fn multi_covariance(
    dist: &Distribution,
    buffer: usize,
    ks: &[usize],
    depth: usize,
    width: usize,
) -> Result<MultiCovariance> {
    validate_indices(buffer, ks)?;
    let capacity = checked_capacity(depth, width)?;
    let l = ks.len();
    let ptilde: Vec<f64> = ks.iter().map(|&k| ptilde(k, buffer)).collect::<Result<_>>()?;
    let quantiles: Vec<f64> = ptilde.iter().map(|&p| dist.quantile(p)).collect::<Result<_>>()?;
    let mut scale = Vec::with_capacity(l);
    for j in 0..l {
        let f = dist.pdf(quantiles[j]);
        if !(f > 0.0 && f.is_finite()) {
            return Err(Error::Domain(format!(
                "density at quantile {} is {f}; the limit needs a positive density",
                quantiles[j]
            )));
        }
        let k = ks[j] as f64;
        scale.push(beta_density(ptilde[j], k, (buffer + 1) as f64 - k) * f);
    }
    let mut pibar = DMatrix::from_element(l, l, 0.5);
    for j in 0..l {
        for i in j + 1..l {
            let v = dirichlet_pibar(ks[j], ks[i], buffer, ptilde[j], ptilde[i])?;
            pibar[(j, i)] = v;
            pibar[(i, j)] = v;
        }
    }
    let sigma = component_sigma(&vec![0.5; l], &pibar)?;
    let covariance = component_remedian_covariance(&scale, &sigma, depth);
    let finite_scale = &covariance / capacity as f64;
    let iterated_covariance = arcsine_iterated_covariance(&covariance, depth);
    Ok(MultiCovariance {
        ptilde,
        quantiles,
        scale,
        pibar,
        sigma,
        covariance,
        finite_scale,
        iterated_covariance,
    })
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Symmetric to `tol` and no eigenvalue below `-tol`.
pub fn is_symmetric_psd(m: &DMatrix<f64>, tol: f64) -> bool {
    m.is_square() && (m - m.transpose()).amax() <= tol && min_eigenvalue(m) >= -tol
}

/// Rescales a covariance matrix to a correlation matrix. Zero-variance
/// coordinates get a unit diagonal and zero off-diagonals.
pub fn covariance_to_correlation(cov: &DMatrix<f64>) -> DMatrix<f64> {
    let sd: Vec<f64> = (0..cov.nrows()).map(|i| cov[(i, i)].max(0.0).sqrt()).collect();
    DMatrix::from_fn(cov.nrows(), cov.ncols(), |i, j| {
        if i == j {
            1.0
        } else if sd[i] > 0.0 && sd[j] > 0.0 {
            cov[(i, j)] / (sd[i] * sd[j])
        } else {
            0.0
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn normal() -> Distribution {
        Distribution::normal(0.0, 1.0).unwrap()
    }

    #[test]
    fn beta_cdf_examples_and_domain() {
        assert_abs_diff_eq!(beta_cdf(0.5, 7.3, 7.3).unwrap(), 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(beta_cdf(0.25, 2.0, 2.0).unwrap(), 0.15625, epsilon = 1e-14);
        assert!(beta_cdf(1.5, 1.0, 1.0).is_err());
        assert!(beta_cdf(0.5, 0.0, 1.0).is_err());
    }

    #[test]
    fn psi_examples() {
        for &(b, k) in &[(3, 1), (3, 4), (41, 2), (101, 3)] {
            assert_eq!(psi(0.0, b, k).unwrap(), 0.0);
            assert_eq!(psi(1.0, b, k).unwrap(), 1.0);
            assert_abs_diff_eq!(psi(0.5, b, k).unwrap(), 0.5, epsilon = 1e-13);
        }
        assert_abs_diff_eq!(psi(0.25, 3, 1).unwrap(), 0.15625, epsilon = 1e-14);
        assert_eq!(psi(0.37, 5, 0).unwrap(), 0.37);
        assert!(psi(0.5, 4, 1).is_err());
        assert!(psi(-0.1, 3, 1).is_err());
    }

    #[test]
    fn psi_derivative_at_half_is_theta_power() {
        for &(b, k) in &[(3, 1), (5, 2), (41, 3)] {
            let p = PsiParams::new(b, k).unwrap();
            assert_abs_diff_eq!(
                p.derivative(0.5),
                theta_b(b).unwrap().powi(k as i32),
                epsilon = 1e-9 * theta_b(b).unwrap().powi(k as i32)
            );
        }
    }

    #[test]
    fn remedian_cdf_examples() {
        let u = Distribution::Uniform01;
        assert_abs_diff_eq!(remedian_cdf(0.25, &u, 3, 1).unwrap(), 0.15625, epsilon = 1e-14);
        let d = normal();
        assert_abs_diff_eq!(remedian_cdf(0.0, &d, 5, 3).unwrap(), 0.5, epsilon = 1e-13);
        let mut prev = 0.0;
        for i in -40..=40 {
            let v = remedian_cdf(i as f64 / 10.0, &d, 5, 2).unwrap();
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn theta_examples() {
        assert_abs_diff_eq!(theta_b(3).unwrap(), 1.5, epsilon = 1e-13);
        assert_abs_diff_eq!(theta_b(5).unwrap(), 1.875, epsilon = 1e-13);
        let b = 100_001usize;
        let ratio = theta_b(b).unwrap() / (2.0 * b as f64 / PI).sqrt();
        assert!((ratio - 1.0).abs() < 0.01);
    }

    #[test]
    fn breakdown_examples() {
        assert_abs_diff_eq!(breakdown_point(1, 3), 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(breakdown_point(1, 101), 51.0 / 101.0, epsilon = 1e-15);
        assert_abs_diff_eq!(breakdown_point(2, 3), 4.0 / 9.0, epsilon = 1e-15);
        assert_abs_diff_eq!(breakdown_point(3, 100_001), 0.125, epsilon = 1e-4);
        assert_abs_diff_eq!(chain_breakdown_point(&[(1, 3), (1, 5)]), 0.4, epsilon = 1e-15);
    }

    #[test]
    fn tau_examples() {
        assert_eq!(tau_sq(1), 1.0);
        assert_abs_diff_eq!(tau_sq(2), 1.570_796_326_794_896_6, epsilon = 1e-15);
        assert_abs_diff_eq!(tau_sq(3), 2.467_401_100_272_339_6, epsilon = 1e-14);
    }

    #[test]
    fn rank_moment_examples() {
        let r = rank_moments(1, 41);
        assert_eq!((r.mean_abs_dev, r.var_abs_dev), (0.0, 0.0));
        let r = rank_moments(2, 41);
        let want = (41.0f64 * 41.0 * (FRAC_PI_2 - 1.0) / (2.0 * PI)).sqrt();
        assert_abs_diff_eq!(r.mean_abs_dev, want, epsilon = 1e-12);
        assert!((r.mean_abs_dev - 12.36).abs() < 0.01);
    }

    #[test]
    fn quad_covariance_k1_collapses() {
        let q = quad_covariance(&normal(), 1);
        for i in 0..4 {
            assert_abs_diff_eq!(q.matrix[(i, 1)], q.matrix[(i, 2)], epsilon = 1e-15);
        }
        assert_eq!(q.matrix[(3, 3)], 0.0);
    }

    #[test]
    fn normal_k3_correlations() {
        let p = correlation_matrix(&normal(), 3);
        use Coordinate::*;
        let rounded = |a, b| (p.get(a, b).unwrap() * 100.0).round() / 100.0;
        assert_eq!(rounded(Mean, Median), 0.80);
        assert_eq!(rounded(Mean, Remedian), 0.51);
        assert_eq!(rounded(Median, Remedian), 0.64);
        assert_eq!(rounded(Remedian, RemedianRank), 0.77);
        assert_eq!(p.get(Mean, RemedianRank), Some(0.0));
        assert_eq!(p.get(Median, RemedianRank), Some(0.0));
    }

    #[test]
    fn pareto_correlations() {
        use Coordinate::*;
        let p = correlation_matrix(&Distribution::pareto(1.0, 3.0).unwrap(), 3);
        assert_eq!((p.get(Mean, Median).unwrap() * 100.0).round(), 45.0);
        assert_eq!((p.get(Mean, Remedian).unwrap() * 100.0).round(), 29.0);
        let p = correlation_matrix(&Distribution::pareto(1.0, 2.01).unwrap(), 3);
        assert_eq!((p.get(Mean, Median).unwrap() * 100.0).round(), 6.0);
        assert_eq!((p.get(Mean, Remedian).unwrap() * 100.0).round(), 4.0);
    }

    #[test]
    fn correlation_agrees_with_normalized_covariance() {
        for d in [normal(), Distribution::pareto(1.0, 3.0).unwrap(), Distribution::beta_sym(2.0).unwrap()] {
            for k in 2..6 {
                let from_cov = covariance_to_correlation(&quad_covariance(&d, k).matrix);
                let direct = correlation_matrix(&d, k).matrix;
                assert!((from_cov - direct).amax() < 1e-12);
            }
        }
    }

    #[test]
    fn infinite_variance_drops_mean() {
        let q = quad_covariance(&Distribution::pareto(1.0, 1.0).unwrap(), 3);
        assert!(!q.mean_available());
        assert_eq!(q.matrix.nrows(), 3);
        assert!(q.matrix.iter().all(|v| v.is_finite()));
        let l = locdiff_variances(&Distribution::pareto(1.0, 1.0).unwrap(), 2);
        assert!(l.median_minus_mean.is_none());
    }

    #[test]
    fn covariances_are_psd() {
        for d in [normal(), Distribution::pareto(1.0, 3.0).unwrap(), Distribution::pareto(1.0, 2.01).unwrap()] {
            for k in 1..6 {
                assert!(is_symmetric_psd(&quad_covariance(&d, k).matrix, 1e-10));
                assert!(is_symmetric_psd(&correlation_matrix(&d, k).matrix, 1e-10));
            }
        }
    }

    #[test]
    fn locdiff_examples() {
        let l = locdiff_variances(&normal(), 1);
        assert_eq!(l.remedian_minus_median, 0.0);
        assert_eq!(l.median_minus_mean, l.remedian_minus_mean);
        let l = locdiff_variances(&normal(), 2);
        // ι = √(2π)
        assert_abs_diff_eq!(l.remedian_minus_median, 2.0 * PI * (FRAC_PI_2 - 1.0) / 4.0, epsilon = 1e-12);
    }

    #[test]
    fn are_examples_match() {
        assert_eq!(are_remedian_vs_median(1), 1.0);
        assert_abs_diff_eq!(are_remedian_vs_mean(&normal(), 1), FRAC_2_PI, epsilon = 1e-15);
        assert_abs_diff_eq!(are_examples(SymmetricFamily::Beta { alpha: 1.0 }, 1).unwrap(), 1.0 / 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(
            are_remedian_vs_mean(&Distribution::Uniform01, 1),
            1.0 / 3.0,
            epsilon = 1e-14
        );
        assert!(are_examples(SymmetricFamily::Beta { alpha: 1e-3 }, 1).unwrap() < 0.01);
        for k in 1..5 {
            let t_limit = are_examples(SymmetricFamily::StudentT { nu: 1e6 }, k).unwrap();
            assert!((t_limit - FRAC_2_PI.powi(k as i32)).abs() < 1e-5);
            let beta_limit = are_examples(SymmetricFamily::Beta { alpha: 1e5 }, k).unwrap();
            assert!((beta_limit - FRAC_2_PI.powi(k as i32)).abs() < 1e-4);
        }
        assert!(are_examples(SymmetricFamily::StudentT { nu: 2.0 }, 1).is_err());
        assert!(are_examples(SymmetricFamily::StudentT { nu: 2.0001 }, 1).unwrap() > 100.0);
    }

    #[test]
    fn component_sigma_examples() {
        let p = [0.3, 0.6];
        let indep = DMatrix::from_row_slice(2, 2, &[0.3, 0.18, 0.18, 0.6]);
        let s = component_sigma(&p, &indep).unwrap();
        assert_abs_diff_eq!(s[(0, 1)], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s[(0, 0)], 0.21, epsilon = 1e-15);
        let comonotone = DMatrix::from_row_slice(2, 2, &[0.3, 0.3, 0.3, 0.6]);
        let s = component_sigma(&p, &comonotone).unwrap();
        assert_abs_diff_eq!(s[(0, 1)], 0.3 - 0.18, epsilon = 1e-15);
        let bad = DMatrix::from_row_slice(2, 2, &[0.3, 0.35, 0.35, 0.6]);
        assert!(matches!(component_sigma(&p, &bad), Err(Error::Infeasible(_))));
    }

    #[test]
    fn pibar_flat_dirichlet_closed_form() {
        for &(p1, p2) in &[(0.2, 0.7), (0.29, 0.71), (0.5, 0.5)] {
            let got = dirichlet_pibar(1, 2, 2, p1, p2).unwrap();
            assert_abs_diff_eq!(got, 2.0 * p1 * p2 - p1 * p1, epsilon = 1e-9);
        }
        assert!(dirichlet_pibar(2, 1, 3, 0.2, 0.4).is_err());
        assert!(dirichlet_pibar(1, 4, 3, 0.2, 0.4).is_err());
    }

    #[test]
    fn pibar_increases_in_upper_probability() {
        let mut prev = 0.0;
        for i in 1..=20 {
            let v = dirichlet_pibar(2, 5, 7, 0.3, 0.3 + 0.035 * i as f64).unwrap();
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn multi_covariance_reduces_to_scalar_laws() {
        let d = normal();
        let f = 1.0 / (2.0 * PI).sqrt();
        let single = multi_covariance(&d, 1, &[1], 3, 5).unwrap();
        assert_abs_diff_eq!(single.covariance[(0, 0)], tau_sq(3) / (4.0 * f * f), epsilon = 1e-12);

        let mc = multi_covariance(&d, 4, &[1, 2, 3, 4], 2, 41).unwrap();
        for j in 0..4 {
            let scalar = tau_sq(2) / (2.0 * mc.scale[j]).powi(2);
            assert_abs_diff_eq!(mc.covariance[(j, j)], scalar, epsilon = 1e-12);
        }
        assert!(is_symmetric_psd(&mc.covariance, 1e-10));
        for j in 0..3 {
            assert!(mc.ptilde[j] < mc.ptilde[j + 1]);
        }
        // symmetric K pattern mirrors the scales
        assert_abs_diff_eq!(mc.scale[0], mc.scale[3], epsilon = 1e-10);
        assert_abs_diff_eq!(mc.covariance[(0, 1)], mc.covariance[(2, 3)], epsilon = 1e-9);
    }

    #[test]
    fn multi_covariance_validates_configuration() {
        assert!(multi_covariance(&Distribution::Uniform01, 3, &[1, 3], 1, 3).is_ok());
        assert!(multi_covariance(&normal(), 3, &[2, 2], 1, 3).is_err());
        assert!(multi_covariance(&normal(), 3, &[1, 2], 1, 4).is_err());
    }

    #[test]
    fn iterated_arcsine_limits() {
        for r in [-1.0, 0.0, 1.0] {
            assert_eq!(iterated_arcsine(r, 4), r);
        }
        assert_eq!(iterated_arcsine(0.3, 0), 0.3);
        let mut prev = 0.8;
        for levels in 1..6 {
            let r = iterated_arcsine(0.8, levels);
            assert!(r > 0.0 && r < prev);
            prev = r;
        }
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.9, 0.9, 1.0]);
        assert!((arcsine_iterated_covariance(&m, 1) - &m).amax() < 1e-15);
        let it = arcsine_iterated_covariance(&m, 3);
        assert_eq!((it[(0, 0)], it[(1, 1)]), (2.0, 1.0));
        let r = 0.9 / 2f64.sqrt();
        let want = FRAC_2_PI * (FRAC_2_PI * r.asin()).asin() * 2f64.sqrt();
        assert!((it[(0, 1)] - want).abs() < 1e-15);
        assert!(is_symmetric_psd(&it, 1e-12));
    }

}
