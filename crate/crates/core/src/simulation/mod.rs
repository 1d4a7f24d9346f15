//! Exact enumeration and Monte-Carlo experiments.
//!
//! Replicate `r` draws from its own ChaCha8 stream keyed by the seed, and
//! results land in replicate order, so a report depends only on its
//! configuration and never on the worker count.

pub mod exact;
pub mod monte_carlo;
pub mod report;
pub mod stats;

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::distributions::Distribution;
use crate::error::{Error, Result};
use crate::multi::validate_indices;
use crate::sketch::checked_capacity;

pub use exact::{adversarial_breakdown, exact_rank_pmf, BreakdownResult, BreakdownWitness, RankPmf};
pub use monte_carlo::{
    mc_component_remedians, mc_dirichlet_pibar, mc_multi_quantile, mc_psirem_identity, mc_quadrivariate,
    mc_rank_distribution, substream,
};
pub use report::{EmpiricalReport, MatrixReport, SampleTable, Statistic, Tolerance, CSV_HEADER};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    ExactRank,
    Rank,
    Quad,
    Psirem,
    Multi,
    Components,
    Breakdown,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Self::ExactRank,
        Self::Rank,
        Self::Quad,
        Self::Psirem,
        Self::Multi,
        Self::Components,
        Self::Breakdown,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::ExactRank => "exact-rank",
            Self::Rank => "rank",
            Self::Quad => "quad",
            Self::Psirem => "psirem",
            Self::Multi => "multi",
            Self::Components => "components",
            Self::Breakdown => "breakdown",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|e| e.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Self::ALL.iter().map(|e| e.name()).collect();
            Error::Domain(format!("unknown experiment '{s}' (expected one of {})", names.join(", ")))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub distribution: Distribution,
    pub depth: usize,
    pub width: usize,
    /// Front-buffer size `N` for the multi-quantile experiment.
    pub buffer: usize,
    pub ks: Vec<usize>,
    /// Cross-component correlation for the component experiment.
    pub rho: f64,
    pub replicates: usize,
    pub seed: u64,
    /// Worker cap; `None` uses rayon's default pool.
    #[serde(skip)]
    pub threads: Option<usize>,
    /// Attach per-replicate vectors to the report.
    #[serde(skip)]
    pub keep_samples: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            distribution: Distribution::Normal { mu: 0.0, sigma: 1.0 },
            depth: 2,
            width: 3,
            buffer: 1,
            ks: vec![1],
            rho: 0.0,
            replicates: 1000,
            seed: 0,
            threads: None,
            keep_samples: false,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        checked_capacity(self.depth, self.width)?;
        validate_indices(self.buffer, &self.ks)?;
        if self.replicates == 0 {
            return Err(Error::Domain("replicates must be ≥ 1".into()));
        }
        if !(self.rho.abs() < 1.0) {
            return Err(Error::Domain(format!("correlation must lie in (-1, 1) (got {})", self.rho)));
        }
        if self.threads == Some(0) {
            return Err(Error::Domain("threads must be ≥ 1".into()));
        }
        Ok(())
    }

    /// `b^k`.
    pub fn capacity(&self) -> Result<u64> {
        checked_capacity(self.depth, self.width)
    }

    /// The parameters an experiment depends on, as `key=value` pairs joined by `;`.
    pub fn param(&self, experiment: Experiment) -> String {
        let mut parts = vec![format!("k={}", self.depth), format!("b={}", self.width)];
        match experiment {
            Experiment::Rank | Experiment::Quad => parts.push(format!("dist={}", self.distribution)),
            Experiment::Multi => {
                parts.push(format!("dist={}", self.distribution));
                parts.push(format!("N={}", self.buffer));
                let ks: Vec<String> = self.ks.iter().map(usize::to_string).collect();
                parts.push(format!("Ks={}", ks.join(",")));
            }
            Experiment::Components => parts.push(format!("rho={}", self.rho)),
            Experiment::Psirem | Experiment::ExactRank | Experiment::Breakdown => {}
        }
        parts.join(";")
    }
}

fn exact_rank_report(config: &ExperimentConfig) -> Result<EmpiricalReport> {
    let pmf = exact_rank_pmf(config.depth, config.width)?;
    let mut report = EmpiricalReport::new(Experiment::ExactRank.name(), config.param(Experiment::ExactRank), 1, None);
    report.push(Statistic::observed("denominator", pmf.denominator as f64));
    for (i, &c) in pmf.numerators.iter().enumerate() {
        report.push(Statistic::observed(format!("numerator[{}]", i + 1), c as f64));
    }
    let n = pmf.size;
    for r in 1..=n / 2 {
        let mirror = pmf.counts[n - r];
        report.push(Statistic::compared(format!("symmetry[{r}]"), mirror as f64, pmf.counts[r - 1] as f64).gated(Tolerance::Exact));
    }
    Ok(report)
}

fn breakdown_report(config: &ExperimentConfig) -> Result<EmpiricalReport> {
    let br = adversarial_breakdown(config.depth, config.width)?;
    let half = config.width.div_ceil(2).pow(config.depth as u32);
    let mut report = EmpiricalReport::new(Experiment::Breakdown.name(), config.param(Experiment::Breakdown), 1, None);
    report.push(Statistic::compared("safe_size", (half - 1) as f64, br.safe_size as f64).gated(Tolerance::Exact));
    report.push(Statistic::compared("witness_size", half as f64, br.witness.positions.len() as f64).gated(Tolerance::Exact));
    report.push(Statistic::compared("witness_estimate", br.magnitude, br.witness.estimate).gated(Tolerance::AtLeast));
    for (i, &p) in br.witness.positions.iter().enumerate() {
        report.push(Statistic::observed(format!("witness_position[{i}]"), p as f64));
    }
    Ok(report)
}

pub fn run(experiment: Experiment, config: &ExperimentConfig) -> Result<EmpiricalReport> {
    match experiment {
        Experiment::ExactRank => exact_rank_report(config),
        Experiment::Breakdown => breakdown_report(config),
        Experiment::Rank => mc_rank_distribution(config),
        Experiment::Quad => mc_quadrivariate(config),
        Experiment::Psirem => mc_psirem_identity(config),
        Experiment::Multi => mc_multi_quantile(config),
        Experiment::Components => mc_component_remedians(config),
    }
}
