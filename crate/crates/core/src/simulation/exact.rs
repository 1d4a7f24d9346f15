//! Exhaustive enumeration over input orderings for tiny remedians.

use num_integer::Integer;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::sketch::{checked_capacity, RemedianSketch};

/// Largest `b^k` accepted for exhaustive enumeration (`10!` orderings).
pub const MAX_EXACT_SIZE: u64 = 10;

fn guarded_size(depth: usize, width: usize) -> Result<usize> {
    let n = checked_capacity(depth, width)?;
    if n > MAX_EXACT_SIZE {
        return Err(Error::SizeGuard(format!(
            "exhaustive enumeration needs b^k ≤ {MAX_EXACT_SIZE}, got {n}"
        )));
    }
    Ok(n as usize)
}

/// Calls `visit` on every permutation of `items` (Heap's algorithm).
fn for_each_permutation<T, F: FnMut(&[T]) -> bool>(items: &mut [T], mut visit: F) {
    let n = items.len();
    if !visit(items) {
        return;
    }
    let mut c = vec![0usize; n];
    let mut i = 1;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                items.swap(0, i);
            } else {
                items.swap(c[i], i);
            }
            if !visit(items) {
                return;
            }
            c[i] += 1;
            i = 1;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

/// Calls `visit` on every `size`-subset of `0..n` in lexicographic order.
fn for_each_subset<F: FnMut(&[usize]) -> bool>(n: usize, size: usize, mut visit: F) {
    if size > n {
        return;
    }
    let mut idx: Vec<usize> = (0..size).collect();
    loop {
        if !visit(&idx) {
            return;
        }
        let Some(i) = (0..size).rev().find(|&i| idx[i] != i + n - size) else {
            return;
        };
        idx[i] += 1;
        for j in i + 1..size {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Exact law of the final estimate's rank among `b^k` distinct inputs, over
/// all orderings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RankPmf {
    pub size: usize,
    /// `counts[r - 1]` orderings end with rank `r`.
    pub counts: Vec<u64>,
    /// `size!`.
    pub total: u64,
    /// `counts` and `total` divided by their common gcd.
    pub numerators: Vec<u64>,
    pub denominator: u64,
}

impl RankPmf {
    pub fn probability(&self, rank: usize) -> f64 {
        match rank.checked_sub(1).and_then(|i| self.counts.get(i)) {
            Some(&c) => c as f64 / self.total as f64,
            None => 0.0,
        }
    }
}

pub fn exact_rank_pmf(depth: usize, width: usize) -> Result<RankPmf> {
    let n = guarded_size(depth, width)?;
    let mut sketch = RemedianSketch::new(depth, width)?;
    let mut values: Vec<f64> = (1..=n).map(|r| r as f64).collect();
    let mut counts = vec![0u64; n];
    let mut failure = None;
    for_each_permutation(&mut values, |perm| {
        sketch.reset();
        match sketch.extend_from_slice(perm).and_then(|_| sketch.final_estimate()) {
            Ok(est) => {
                counts[est as usize - 1] += 1;
                true
            }
            Err(e) => {
                failure = Some(e);
                false
            }
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    let total: u64 = counts.iter().sum();
    let g = counts.iter().fold(total, |g, &c| g.gcd(&c));
    Ok(RankPmf {
        size: n,
        numerators: counts.iter().map(|c| c / g).collect(),
        denominator: total / g,
        counts,
        total,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BreakdownWitness {
    /// Stream positions (0-based) replaced by `magnitude`.
    pub positions: Vec<usize>,
    /// The full corrupted stream.
    pub stream: Vec<f64>,
    pub estimate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BreakdownResult {
    /// Largest corruption size that never lifts the estimate above the
    /// clean maximum, over every choice of positions and input ordering.
    pub safe_size: usize,
    pub witness: BreakdownWitness,
    pub magnitude: f64,
    pub clean_max: f64,
}

/// Replaces every subset of positions with `+M` (`M = 10¹² ·` clean maximum),
/// growing the subset size until some ordering is corrupted.
///
/// Only the relative order of the untouched values matters, so each subset
/// is checked against every ordering of the remaining clean ranks.
pub fn adversarial_breakdown(depth: usize, width: usize) -> Result<BreakdownResult> {
    let n = guarded_size(depth, width)?;
    let clean_max = n as f64;
    let magnitude = 1e12 * clean_max;
    let mut sketch = RemedianSketch::new(depth, width)?;
    let mut stream = vec![0.0; n];
    for size in 1..=n {
        let mut witness = None;
        let mut failure = None;
        for_each_subset(n, size, |positions| {
            let free: Vec<usize> = (0..n).filter(|i| !positions.contains(i)).collect();
            let mut clean: Vec<f64> = (1..=free.len()).map(|r| r as f64).collect();
            for_each_permutation(&mut clean, |perm| {
                stream.fill(magnitude);
                for (&i, &x) in free.iter().zip(perm) {
                    stream[i] = x;
                }
                sketch.reset();
                match sketch.extend_from_slice(&stream).and_then(|_| sketch.final_estimate()) {
                    Ok(est) if est > clean_max => {
                        witness = Some(BreakdownWitness {
                            positions: positions.to_vec(),
                            stream: stream.clone(),
                            estimate: est,
                        });
                        false
                    }
                    Ok(_) => true,
                    Err(e) => {
                        failure = Some(e);
                        false
                    }
                }
            });
            witness.is_none() && failure.is_none()
        });
        if let Some(e) = failure {
            return Err(e);
        }
        if let Some(witness) = witness {
            return Ok(BreakdownResult {
                safe_size: size - 1,
                witness,
                magnitude,
                clean_max,
            });
        }
    }
    unreachable!("corrupting every input always lifts the estimate")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn permutations_and_subsets() {
        let mut items = [1, 2, 3, 4];
        let mut seen = std::collections::BTreeSet::new();
        for_each_permutation(&mut items, |p| seen.insert(p.to_vec()));
        assert_eq!(seen.len(), 24);
        let mut subsets = Vec::new();
        for_each_subset(4, 2, |s| {
            subsets.push(s.to_vec());
            true
        });
        assert_eq!(subsets.len(), 6);
        assert_eq!(subsets[5], vec![2, 3]);
    }

    #[test]
    fn median_of_three() {
        let pmf = exact_rank_pmf(1, 3).unwrap();
        assert_eq!(pmf.numerators, vec![0, 1, 0]);
        assert_eq!(pmf.denominator, 1);
        let br = adversarial_breakdown(1, 3).unwrap();
        assert_eq!(br.safe_size, 1);
        assert_eq!(br.witness.positions.len(), 2);
        assert!(br.witness.estimate >= br.magnitude);
    }

    #[test]
    fn size_guard() {
        assert!(matches!(exact_rank_pmf(3, 3), Err(Error::SizeGuard(_))));
        assert!(matches!(adversarial_breakdown(1, 11), Err(Error::SizeGuard(_))));
    }
}
