//! Monte Carlo experiments and their pass/fail assertions.
//!
//! Replicas are independent: replica `r` of the `Y` side draws from stream
//! `r`, replica `r` of the `Z` side for the `j`-th `n` from stream
//! `((j + 1) << 32) | r`, and auxiliary samplers use streams with the top 32
//! bits all set. Results are gathered in replica order, so the worker count
//! never changes a report.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Experiment, ExperimentConfig};
use crate::error::{Error, Result};
use crate::model::RngStream;

mod gap;
pub mod gronwall;
mod mean_field;
mod moments;
mod noise_check;
mod pde_check;
mod samplers;

pub use gap::{run_gap_experiment, GapExperimentReport, GapReport};
pub use gronwall::{g_bound, g_function, picard_oracle, run_gronwall_check, GronwallBound, GronwallReport};
pub use mean_field::{run_mean_field, MeanFieldReport};
pub use moments::{run_moment_and_martingale_suite, MomentReport};
pub use noise_check::{run_noise_check, NoiseReport};
pub use pde_check::{run_pde_convergence, PdeReport};
pub use samplers::{run_sampler_check, SamplerReport};

const AUX_STREAMS: u64 = 0xFFFF_FFFF_0000_0000;

pub fn y_stream(seed: u64, replica: u64) -> RngStream {
    RngStream::new(seed, replica & 0xFFFF_FFFF)
}

pub fn z_stream(seed: u64, n_index: usize, replica: u64) -> RngStream {
    RngStream::new(seed, ((n_index as u64 + 1) << 32) | (replica & 0xFFFF_FFFF))
}

pub(crate) fn aux_stream(seed: u64, k: u64) -> RngStream {
    RngStream::new(seed, AUX_STREAMS | k)
}

/// Fixed-size worker pool for replica fan-out.
pub struct Executor {
    pool: rayon::ThreadPool,
}

impl Executor {
    pub fn new(workers: usize) -> Result<Self> {
        if workers == 0 {
            return Err(Error::invalid("workers", "must be positive"));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::Pool(e.to_string()))?;
        Ok(Executor { pool })
    }

    pub fn workers(&self) -> usize {
        self.pool.current_num_threads()
    }

    /// `f(0), ..., f(count - 1)` evaluated on the pool, returned in index order.
    pub fn map_replicas<T, F>(&self, count: u64, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send,
    {
        self.pool.install(|| (0..count).into_par_iter().map(f).collect())
    }

    /// As [`Executor::map_replicas`], failing with the lowest-index error.
    pub fn try_map_replicas<T, F>(&self, count: u64, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(u64) -> Result<T> + Sync + Send,
    {
        self.map_replicas(count, f).into_iter().collect()
    }
}

impl std::fmt::Debug for Executor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Executor").field("workers", &self.workers()).finish()
    }
}

/// One named acceptance check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assertion {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Assertion {
    pub fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Assertion {
            name: name.into(),
            pass,
            detail: detail.into(),
        }
    }
}

/// A results table with a fixed column order.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

/// Shortest round-trip text for a float.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "kebab-case")]
pub enum Report {
    NoiseCheck(NoiseReport),
    SheMean(MeanFieldReport),
    PdeConvergence(PdeReport),
    SamplerCheck(SamplerReport),
    DualityGap(GapExperimentReport),
    MomentsMartingale(MomentReport),
    Gronwall(GronwallReport),
}

impl Report {
    pub fn assertions(&self) -> &[Assertion] {
        match self {
            Report::NoiseCheck(r) => &r.assertions,
            Report::SheMean(r) => &r.assertions,
            Report::PdeConvergence(r) => &r.assertions,
            Report::SamplerCheck(r) => &r.assertions,
            Report::DualityGap(r) => &r.assertions,
            Report::MomentsMartingale(r) => &r.assertions,
            Report::Gronwall(r) => &r.assertions,
        }
    }

    pub fn passed(&self) -> bool {
        self.assertions().iter().all(|a| a.pass)
    }

    pub fn table(&self) -> Table {
        match self {
            Report::NoiseCheck(r) => r.table(),
            Report::SheMean(r) => r.table(),
            Report::PdeConvergence(r) => r.table(),
            Report::SamplerCheck(r) => r.table(),
            Report::DualityGap(r) => r.table(),
            Report::MomentsMartingale(r) => r.table(),
            Report::Gronwall(r) => r.table(),
        }
    }
}

/// Runs the experiment named in `config`.
pub fn run_experiment(config: &ExperimentConfig, exec: &Executor) -> Result<Report> {
    config.validate()?;
    Ok(match config.experiment {
        Experiment::NoiseCheck => Report::NoiseCheck(run_noise_check(config, exec)?),
        Experiment::SheMean => Report::SheMean(run_mean_field(config, exec)?),
        Experiment::PdeConvergence => Report::PdeConvergence(run_pde_convergence(config, exec)?),
        Experiment::SamplerCheck => Report::SamplerCheck(run_sampler_check(config, exec)?),
        Experiment::DualityGap => Report::DualityGap(run_gap_experiment(config, exec)?),
        Experiment::MomentsMartingale => Report::MomentsMartingale(run_moment_and_martingale_suite(config, exec)?),
        Experiment::Gronwall => Report::Gronwall(run_gronwall_check(config, exec)?),
    })
}

/// Standard check `|estimate - target| <= 3 se + allowance`.
pub(crate) fn within_ci(estimate: f64, target: f64, se: f64, allowance: f64) -> bool {
    (estimate - target).abs() <= 3.0 * se + allowance
}
