//! Several quantiles at once: a size-`N` front buffer whose `K_j`-th order
//! statistics feed `ℓ` parallel remedians. Remedian `j` converges to
//! `F⁻¹(p̃_j)` with `p̃_j = B_{K_j,N}⁻¹(½)`.

use serde::Serialize;

use crate::analytics::breakdown_point;
use crate::error::{Error, Result};
use crate::sketch::{checked_capacity, QueryResult, RemedianSketch};
use crate::special::inc_beta;

const PTILDE_TOL: f64 = 1e-12;
const PTILDE_MAX_ITER: usize = 200;

/// Checks `1 ≤ K₁ < K₂ < … < K_ℓ ≤ N`.
pub fn validate_indices(buffer: usize, ks: &[usize]) -> Result<()> {
    if buffer == 0 {
        return Err(Error::InvalidIndices("buffer size N must be ≥ 1".into()));
    }
    if ks.is_empty() {
        return Err(Error::InvalidIndices("need at least one index".into()));
    }
    if let Some(&k) = ks.iter().find(|&&k| k == 0 || k > buffer) {
        return Err(Error::InvalidIndices(format!("index {k} outside [1, {buffer}]")));
    }
    if let Some(w) = ks.windows(2).find(|w| w[0] >= w[1]) {
        return Err(Error::InvalidIndices(format!(
            "indices must be strictly increasing ({} then {})",
            w[0], w[1]
        )));
    }
    Ok(())
}

/// The median of Beta(K, N - K + 1): the `p̃` solving `B_{K,N}(p̃) = ½`,
/// found by bisection.
pub fn ptilde(k: usize, n: usize) -> Result<f64> {
    if k == 0 || k > n {
        return Err(Error::Domain(format!("need 1 ≤ K ≤ N (got K={k}, N={n})")));
    }
    let (a, b) = (k as f64, (n - k + 1) as f64);
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..PTILDE_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if inc_beta(mid, a, b) < 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < PTILDE_TOL {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `min_j [min(K_j, N - K_j + 1) / N] · (⌈b/2⌉ / b)^k`.
pub fn multi_breakdown(buffer: usize, ks: &[usize], depth: usize, width: usize) -> Result<f64> {
    validate_indices(buffer, ks)?;
    checked_capacity(depth, width)?;
    let front = ks
        .iter()
        .map(|&k| k.min(buffer - k + 1) as f64 / buffer as f64)
        .fold(f64::INFINITY, f64::min);
    Ok(front * breakdown_point(depth, width))
}

/// Scans `N ≤ max_buffer` for the `(K, N)` whose `p̃` is closest to `p`.
pub fn nearest_ptilde(p: f64, max_buffer: usize) -> Result<(usize, usize, f64)> {
    if !(p > 0.0 && p < 1.0) || max_buffer == 0 {
        return Err(Error::Domain(format!("need p in (0, 1) and N_max ≥ 1 (got {p}, {max_buffer})")));
    }
    let mut best = (1, 1, 0.5);
    for n in 1..=max_buffer {
        // p̃ is increasing in K; probe the neighbours of K ≈ pN.
        let guess = ((p * n as f64).round() as usize).clamp(1, n);
        for k in guess.saturating_sub(1).max(1)..=(guess + 1).min(n) {
            let pt = ptilde(k, n)?;
            if (pt - p).abs() < (best.2 - p).abs() {
                best = (k, n, pt);
            }
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultiQuery {
    pub estimates: Vec<f64>,
    pub n: u64,
    pub digits: Vec<usize>,
    /// Buffered values not yet forwarded to the remedians.
    pub pending: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiQuantileEstimator {
    buffer_size: usize,
    ks: Vec<usize>,
    buffer: Vec<f64>,
    remedians: Vec<RemedianSketch>,
    consumed: u64,
}

impl MultiQuantileEstimator {
    pub fn new(buffer_size: usize, ks: &[usize], depth: usize, width: usize) -> Result<Self> {
        validate_indices(buffer_size, ks)?;
        let proto = RemedianSketch::new(depth, width)?;
        Ok(Self {
            buffer_size,
            ks: ks.to_vec(),
            buffer: Vec::with_capacity(buffer_size),
            remedians: vec![proto; ks.len()],
            consumed: 0,
        })
    }

    pub fn buffer_size(&self) -> usize {
        self.buffer_size
    }

    pub fn indices(&self) -> &[usize] {
        &self.ks
    }

    pub fn remedians(&self) -> &[RemedianSketch] {
        &self.remedians
    }

    /// Values consumed: `N · n + |buffer|`.
    pub fn count(&self) -> u64 {
        self.consumed
    }

    /// `N · b^k`.
    pub fn capacity(&self) -> u64 {
        self.remedians[0].capacity() * self.buffer_size as u64
    }

    pub fn pending(&self) -> usize {
        self.buffer.len()
    }

    /// `p̃_j` for every index.
    pub fn target_probabilities(&self) -> Vec<f64> {
        self.ks
            .iter()
            .map(|&k| ptilde(k, self.buffer_size).expect("indices validated at construction"))
            .collect()
    }

    pub fn breakdown_point(&self) -> f64 {
        let r = &self.remedians[0];
        multi_breakdown(self.buffer_size, &self.ks, r.rows(), r.width())
            .expect("configuration validated at construction")
    }

    pub fn insert(&mut self, x: f64) -> Result<()> {
        if !x.is_finite() {
            return Err(Error::NonFinite(x));
        }
        if self.remedians[0].is_complete() {
            return Err(Error::AtCapacity(self.capacity()));
        }
        self.buffer.push(x);
        self.consumed += 1;
        if self.buffer.len() == self.buffer_size {
            self.forward()?;
        }
        Ok(())
    }

    /// Sends the `K_j`-th smallest buffered value to remedian `j`; ties go
    /// to the earlier arrival.
    fn forward(&mut self) -> Result<()> {
        let mut keyed: Vec<(f64, usize)> = self.buffer.iter().copied().zip(0..).collect();
        let by_key = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.ks.len() == 1 {
            keyed.select_nth_unstable_by(self.ks[0] - 1, by_key);
        } else {
            keyed.sort_unstable_by(by_key);
        }
        for (remedian, &k) in self.remedians.iter_mut().zip(&self.ks) {
            remedian.insert(keyed[k - 1].0)?;
        }
        self.buffer.clear();
        Ok(())
    }

    /// One estimate per index, once `N · b^k` values have been consumed.
    pub fn final_estimates(&self) -> Result<Vec<f64>> {
        self.remedians.iter().map(|r| r.final_estimate()).collect()
    }

    /// Weighted-median query of every remedian; the partial buffer is ignored
    /// and reported as `pending`.
    pub fn query(&self) -> Result<MultiQuery> {
        let results: Vec<QueryResult> = self.remedians.iter().map(|r| r.query()).collect::<Result<_>>()?;
        Ok(MultiQuery {
            estimates: results.iter().map(|q| q.estimate).collect(),
            n: results[0].n,
            digits: results[0].digits.clone(),
            pending: self.buffer.len(),
        })
    }
}
