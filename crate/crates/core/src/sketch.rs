//! The remedian: a `k × b` matrix of buffers in which row `i + 1` collects the
//! medians of full row-`i` buffers.
//!
//! A cell in row `i` (zero based) stands for `b^i` inputs, so the occupancy
//! counts of the rows are exactly the base-`b` digits of the number of values
//! inserted so far. Once the `b^k`-th value arrives the last row flushes, and
//! the value it emits is the sketch's final estimate.

use std::cmp::Ordering;

use crate::error::{Error, Result};

/// Validates `(k, b)` and returns the capacity `b^k`.
pub(crate) fn checked_capacity(rows: usize, width: usize) -> Result<u64> {
    if width < 3 || width % 2 == 0 {
        return Err(Error::InvalidWidth(width));
    }
    if rows < 1 {
        return Err(Error::InvalidRows);
    }
    u32::try_from(rows)
        .ok()
        .and_then(|r| (width as u64).checked_pow(r))
        .ok_or(Error::CapacityOverflow { rows, width })
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryResult {
    pub estimate: f64,
    pub n: u64,
    /// Row occupancy counts; `n = Σ digits[i] · b^i`.
    pub digits: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RemedianSketch {
    rows: usize,
    width: usize,
    cells: Vec<f64>,
    fill: Vec<usize>,
    count: u64,
    capacity: u64,
    emitted: Option<f64>,
}

impl RemedianSketch {
    pub fn new(rows: usize, width: usize) -> Result<Self> {
        let capacity = checked_capacity(rows, width)?;
        Ok(Self {
            rows,
            width,
            cells: vec![0.0; rows * width],
            fill: vec![0; rows],
            count: 0,
            capacity,
            emitted: None,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// `b^k`.
    pub fn capacity(&self) -> u64 {
        self.capacity
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn is_complete(&self) -> bool {
        self.emitted.is_some()
    }

    /// Occupied cells of row `i` (zero based), in arrival order.
    pub fn row(&self, i: usize) -> &[f64] {
        let start = i * self.width;
        &self.cells[start..start + self.fill[i]]
    }

    /// Current occupancy of every row.
    pub fn digits(&self) -> &[usize] {
        &self.fill
    }

    pub fn breakdown_point(&self) -> f64 {
        crate::analytics::breakdown_point(self.rows, self.width)
    }

    pub fn insert(&mut self, x: f64) -> Result<()> {
        if !x.is_finite() {
            return Err(Error::NonFinite(x));
        }
        if self.count >= self.capacity {
            return Err(Error::AtCapacity(self.capacity));
        }
        self.push(0, x);
        self.count += 1;

        let mut i = 0;
        while self.fill[i] == self.width {
            let median = self.flush(i);
            if i + 1 == self.rows {
                self.emitted = Some(median);
                break;
            }
            self.push(i + 1, median);
            i += 1;
        }
        Ok(())
    }

    fn push(&mut self, row: usize, x: f64) {
        self.cells[row * self.width + self.fill[row]] = x;
        self.fill[row] += 1;
    }

    /// Empties a full row and returns its median.
    fn flush(&mut self, row: usize) -> f64 {
        let start = row * self.width;
        let buffer = &mut self.cells[start..start + self.width];
        let mid = self.width / 2;
        let (_, median, _) = buffer.select_nth_unstable_by(mid, f64::total_cmp);
        let median = *median;
        self.fill[row] = 0;
        median
    }

    /// Weighted median of the stored cells, with a row-`i` cell weighing `b^i`.
    ///
    /// Cells are ordered by `(value, row, column)`; the estimate is the first
    /// whose cumulative weight reaches `n / 2`. At capacity the final estimate
    /// is returned with the digits the last row held just before it flushed.
    pub fn query(&self) -> Result<QueryResult> {
        if let Some(estimate) = self.emitted {
            let mut digits = vec![0; self.rows];
            digits[self.rows - 1] = self.width;
            return Ok(QueryResult {
                estimate,
                n: self.count,
                digits,
            });
        }
        if self.count == 0 {
            return Err(Error::Empty);
        }

        let mut weighted = Vec::with_capacity(self.fill.iter().sum());
        let mut weight = 1u64;
        for i in 0..self.rows {
            for (j, &value) in self.row(i).iter().enumerate() {
                weighted.push((value, i, j, weight));
            }
            weight = weight.saturating_mul(self.width as u64);
        }
        weighted.sort_by(|a, b| {
            a.0.total_cmp(&b.0)
                .then(a.1.cmp(&b.1))
                .then(a.2.cmp(&b.2))
        });

        let mut cumulative = 0u64;
        let mut estimate = weighted[weighted.len() - 1].0;
        for &(value, _, _, w) in &weighted {
            cumulative += w;
            // cumulative ≥ n/2
            if 2 * cumulative >= self.count {
                estimate = value;
                break;
            }
        }
        Ok(QueryResult {
            estimate,
            n: self.count,
            digits: self.fill.clone(),
        })
    }

    /// The value the last row emitted on the `b^k`-th insert.
    pub fn final_estimate(&self) -> Result<f64> {
        self.emitted.ok_or(Error::NotAtCapacity {
            count: self.count,
            capacity: self.capacity,
        })
    }

    /// Returns the sketch to its empty state, keeping `(k, b)`.
    pub fn reset(&mut self) {
        self.fill.iter_mut().for_each(|f| *f = 0);
        self.count = 0;
        self.emitted = None;
    }

    /// Inserts a whole slice and returns the final estimate if the sketch
    /// reached capacity.
    pub fn extend_from_slice(&mut self, xs: &[f64]) -> Result<Option<f64>> {
        for &x in xs {
            self.insert(x)?;
        }
        Ok(self.emitted)
    }
}

/// Final estimate of a `(k, b)` remedian over exactly `b^k` values.
pub fn remedian_of(values: &[f64], rows: usize, width: usize) -> Result<f64> {
    let mut sketch = RemedianSketch::new(rows, width)?;
    if values.len() as u64 != sketch.capacity() {
        return Err(Error::NotAtCapacity {
            count: values.len() as u64,
            capacity: sketch.capacity(),
        });
    }
    sketch.extend_from_slice(values)?;
    sketch.final_estimate()
}

/// A chain of remedians: each stage's final estimate is one input to the next
/// stage, which then starts over empty.
#[derive(Debug, Clone, PartialEq)]
pub struct IteratedRemedian {
    stages: Vec<RemedianSketch>,
    count: u64,
    capacity: u64,
    output: Option<f64>,
}

impl IteratedRemedian {
    pub fn new(params: &[(usize, usize)]) -> Result<Self> {
        if params.is_empty() {
            return Err(Error::Domain("a chain needs at least one stage".into()));
        }
        let stages = params
            .iter()
            .map(|&(k, b)| RemedianSketch::new(k, b))
            .collect::<Result<Vec<_>>>()?;
        let capacity = stages
            .iter()
            .try_fold(1u64, |acc, s| acc.checked_mul(s.capacity()))
            .ok_or(Error::CapacityOverflow {
                rows: params.iter().map(|p| p.0).sum(),
                width: params.iter().map(|p| p.1).max().unwrap_or(0),
            })?;
        Ok(Self {
            stages,
            count: 0,
            capacity,
            output: None,
        })
    }

    pub fn stages(&self) -> &[RemedianSketch] {
        &self.stages
    }

    /// `Π b_j^{k_j}`.
    pub fn capacity(&self) -> u64 {
        self.capacity
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn insert(&mut self, x: f64) -> Result<()> {
        if !x.is_finite() {
            return Err(Error::NonFinite(x));
        }
        if self.count >= self.capacity {
            return Err(Error::AtCapacity(self.capacity));
        }
        self.count += 1;
        let last = self.stages.len() - 1;
        let mut value = x;
        for (j, stage) in self.stages.iter_mut().enumerate() {
            stage.insert(value)?;
            if !stage.is_complete() {
                break;
            }
            value = stage.final_estimate()?;
            if j == last {
                self.output = Some(value);
            } else {
                stage.reset();
            }
        }
        Ok(())
    }

    pub fn final_estimate(&self) -> Result<f64> {
        self.output.ok_or(Error::NotAtCapacity {
            count: self.count,
            capacity: self.capacity,
        })
    }

    /// `Π (⌈b_j/2⌉ / b_j)^{k_j}`.
    pub fn breakdown_point(&self) -> f64 {
        self.stages
            .iter()
            .map(|s| crate::analytics::breakdown_point(s.rows(), s.width()))
            .product()
    }
}

/// Rank (1 based) of `value` among `inputs`: the number of inputs `≤ value`.
pub fn rank_of(value: f64, inputs: &[f64]) -> usize {
    inputs
        .iter()
        .filter(|x| x.total_cmp(&value) != Ordering::Greater)
        .count()
}
