//! Sample moments with standard errors, and the one-sample KS distance.

use nalgebra::DMatrix;

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance; NaN for fewer than two points.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Standard error of the sample mean.
pub fn mean_se(xs: &[f64]) -> f64 {
    (variance(xs) / xs.len() as f64).sqrt()
}

/// Sample covariance of the rows of `data` (one row per replicate) together
/// with the standard error of every entry, taken as the standard error of
/// the mean of the centred products.
pub fn covariance_with_se(data: &[Vec<f64>]) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = data.len();
    let d = data.first().map_or(0, Vec::len);
    let means: Vec<f64> = (0..d)
        .map(|j| data.iter().map(|row| row[j]).sum::<f64>() / n as f64)
        .collect();
    let mut cov = DMatrix::zeros(d, d);
    let mut se = DMatrix::zeros(d, d);
    let mut products = vec![0.0; n];
    for i in 0..d {
        for j in i..d {
            for (p, row) in products.iter_mut().zip(data) {
                *p = (row[i] - means[i]) * (row[j] - means[j]);
            }
            let c = products.iter().sum::<f64>() / (n as f64 - 1.0);
            let s = mean_se(&products);
            cov[(i, j)] = c;
            cov[(j, i)] = c;
            se[(i, j)] = s;
            se[(j, i)] = s;
        }
    }
    (cov, se)
}

/// `sup_x |F_n(x) - F(x)|`.
pub fn ks_distance<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> f64 {
    let mut xs = sample.to_vec();
    xs.sort_unstable_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter().enumerate().fold(0.0, |d, (i, &x)| {
        let f = cdf(x);
        d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n)
    })
}

/// Asymptotic 5% critical value of the one-sample KS statistic.
pub fn ks_critical_5pct(n: usize) -> f64 {
    1.358_1 / (n as f64).sqrt()
}
