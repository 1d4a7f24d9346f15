//! Experiment reports: one row per statistic, serialized as JSON or as
//! long-format CSV.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};

/// How a statistic is judged against its prediction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Tolerance {
    Exact,
    Absolute(f64),
    Relative(f64),
    /// Within this many of the row's own standard errors.
    StdErrors(f64),
    /// Observed strictly below the predicted bound.
    Below,
    /// Observed at or above the predicted bound.
    AtLeast,
}

impl Tolerance {
    pub fn accepts(self, predicted: f64, observed: f64, std_error: Option<f64>) -> bool {
        let gap = (observed - predicted).abs();
        match self {
            Self::Exact => observed == predicted,
            Self::Absolute(t) => gap <= t,
            Self::Relative(t) => gap <= t * predicted.abs(),
            Self::StdErrors(z) => std_error.is_some_and(|s| gap <= z * s),
            Self::Below => observed < predicted,
            Self::AtLeast => observed >= predicted,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Statistic {
    pub name: String,
    pub predicted: Option<f64>,
    pub observed: f64,
    pub std_error: Option<f64>,
    pub relative_error: Option<f64>,
    pub tolerance: Option<Tolerance>,
    pub pass: Option<bool>,
}

impl Statistic {
    pub fn observed(name: impl Into<String>, observed: f64) -> Self {
        Self {
            name: name.into(),
            predicted: None,
            observed,
            std_error: None,
            relative_error: None,
            tolerance: None,
            pass: None,
        }
    }

    pub fn compared(name: impl Into<String>, predicted: f64, observed: f64) -> Self {
        let relative_error = (predicted != 0.0).then(|| (observed - predicted) / predicted.abs());
        Self {
            predicted: Some(predicted),
            relative_error,
            ..Self::observed(name, observed)
        }
    }

    pub fn with_se(mut self, std_error: f64) -> Self {
        self.std_error = Some(std_error);
        self
    }

    pub fn gated(mut self, tolerance: Tolerance) -> Self {
        self.tolerance = Some(tolerance);
        self.pass = self
            .predicted
            .map(|p| tolerance.accepts(p, self.observed, self.std_error));
        self
    }
}

/// A named matrix with labelled coordinates, kept for readable JSON.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatrixReport {
    pub name: String,
    pub coordinates: Vec<String>,
    pub predicted: Option<Vec<Vec<f64>>>,
    pub observed: Vec<Vec<f64>>,
}

pub(crate) fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// Per-replicate vectors, one column per coordinate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalReport {
    pub experiment: String,
    pub param: String,
    pub replicates: usize,
    pub seed: Option<u64>,
    pub statistics: Vec<Statistic>,
    pub matrices: Vec<MatrixReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<SampleTable>,
}

pub const CSV_HEADER: [&str; 7] = [
    "experiment",
    "param",
    "replicate_count",
    "statistic",
    "predicted",
    "observed",
    "std_error",
];

/// 17 significant digits, enough to round-trip any `f64`.
fn fmt_number(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

fn fmt_option(x: Option<f64>) -> String {
    x.map(fmt_number).unwrap_or_default()
}

impl EmpiricalReport {
    pub fn new(experiment: &str, param: String, replicates: usize, seed: Option<u64>) -> Self {
        Self {
            experiment: experiment.to_string(),
            param,
            replicates,
            seed,
            statistics: Vec::new(),
            matrices: Vec::new(),
            samples: None,
        }
    }

    pub fn push(&mut self, stat: Statistic) {
        self.statistics.push(stat);
    }

    pub fn statistic(&self, name: &str) -> Option<&Statistic> {
        self.statistics.iter().find(|s| s.name == name)
    }

    /// Statistics whose tolerance check failed.
    pub fn failures(&self) -> Vec<&Statistic> {
        self.statistics.iter().filter(|s| s.pass == Some(false)).collect()
    }

    pub fn passed(&self) -> bool {
        self.failures().is_empty()
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Domain(e.to_string()))
    }

    pub fn to_csv(&self) -> Result<String> {
        let csv_err = |e: csv::Error| Error::Domain(e.to_string());
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_HEADER).map_err(csv_err)?;
        let count = self.replicates.to_string();
        for s in &self.statistics {
            w.write_record([
                self.experiment.as_str(),
                self.param.as_str(),
                &count,
                &s.name,
                &fmt_option(s.predicted),
                &fmt_number(s.observed),
                &fmt_option(s.std_error),
            ])
            .map_err(csv_err)?;
        }
        if let Some(table) = &self.samples {
            for (r, row) in table.rows.iter().enumerate() {
                let param = format!("{};replicate={r}", self.param);
                for (col, &x) in table.columns.iter().zip(row) {
                    let name = format!("sample.{col}");
                    w.write_record([
                        self.experiment.as_str(),
                        &param,
                        &count,
                        &name,
                        "",
                        &fmt_number(x),
                        "",
                    ])
                    .map_err(csv_err)?;
                }
            }
        }
        let bytes = w.into_inner().map_err(|e| Error::Domain(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Domain(e.to_string()))
    }
}
