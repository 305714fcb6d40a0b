//! Cell-wise check of `E Y_t = P_t phi`.

use serde::{Deserialize, Serialize};

use super::{fmt_f64, Assertion, Executor, Table};
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::heat::SemigroupPlan;
use crate::she::{simulate_y_path_with, YStepper};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldTime {
    pub t: f64,
    pub mean: Vec<f64>,
    pub se: Vec<f64>,
    pub target: Vec<f64>,
    /// `max_x (|mean - target| - 3 se)`.
    pub worst_excess: f64,
    pub worst_x: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldReport {
    pub seed: u64,
    pub replicas: u64,
    pub aborted: u64,
    pub allowance: f64,
    pub centers: Vec<f64>,
    /// Mean clamped mass per path divided by the initial mass.
    pub clamp_fraction: f64,
    pub times: Vec<MeanFieldTime>,
    pub assertions: Vec<Assertion>,
}

impl MeanFieldReport {
    pub fn table(&self) -> Table {
        let mut rows = Vec::new();
        for t in &self.times {
            for (i, x) in self.centers.iter().enumerate() {
                let pass = super::within_ci(t.mean[i], t.target[i], t.se[i], self.allowance);
                rows.push(vec![
                    fmt_f64(t.t),
                    fmt_f64(*x),
                    fmt_f64(t.mean[i]),
                    fmt_f64(t.se[i]),
                    fmt_f64(t.target[i]),
                    pass.to_string(),
                ]);
            }
        }
        Table {
            columns: vec!["t", "x", "mean", "se", "target", "pass"],
            rows,
        }
    }
}

pub fn run_mean_field(config: &ExperimentConfig, exec: &Executor) -> Result<MeanFieldReport> {
    let params = config.model;
    let grid = params.grid;
    let plan = SemigroupPlan::new(grid);
    let stepper = YStepper::new(&plan, &params)?;
    let phi = config.phi.sample(grid);
    let seed = config.seed;
    let times = &config.output_times;

    let paths = exec.try_map_replicas(config.replicas, |r| {
        let mut rng = super::y_stream(seed, r).rng();
        simulate_y_path_with(&stepper, &phi, &params, times, None, &mut rng)
    })?;
    let aborted = paths.iter().filter(|p| p.is_aborted()).count() as u64;
    let initial = phi.integrate();
    let clamped: f64 = paths.iter().map(|p| p.total_clamped()).sum::<f64>() / paths.len() as f64;
    let clamp_fraction = if initial > 0.0 { clamped / initial } else { 0.0 };

    let cells = grid.cells;
    let mut out = Vec::new();
    let mut assertions = Vec::new();
    let mut sorted = times.clone();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    for &t in &sorted {
        let mut sum = vec![0.0; cells];
        let mut sq = vec![0.0; cells];
        let mut count = 0usize;
        for p in paths.iter().filter(|p| !p.is_aborted()) {
            let f = p.field_at(t).expect("output time stored");
            for (i, v) in f.values().iter().enumerate() {
                sum[i] += v;
                sq[i] += v * v;
            }
            count += 1;
        }
        let nf = count as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / nf.max(1.0)).collect();
        let se: Vec<f64> = if count > 1 {
            sq.iter()
                .zip(&mean)
                .map(|(q, m)| ((q - nf * m * m).max(0.0) / (nf - 1.0) / nf).sqrt())
                .collect()
        } else {
            vec![0.0; cells]
        };
        let target = plan.apply(&phi, t).into_values();
        let mut worst_excess = f64::NEG_INFINITY;
        let mut worst_x = grid.center(0);
        for i in 0..cells {
            let e = (mean[i] - target[i]).abs() - 3.0 * se[i];
            if e > worst_excess {
                worst_excess = e;
                worst_x = grid.center(i);
            }
        }
        let pass = count > 0 && worst_excess <= config.allowances.mean_field;
        assertions.push(Assertion::new(
            format!("mean field at t={t}"),
            pass,
            format!(
                "max_x(|mean - P_t phi| - 3se) = {worst_excess:.3e} at x={worst_x:.3} (allowance {})",
                config.allowances.mean_field
            ),
        ));
        out.push(MeanFieldTime {
            t,
            mean,
            se,
            target,
            worst_excess,
            worst_x,
            pass,
        });
    }
    let fraction = aborted as f64 / config.replicas as f64;
    assertions.push(Assertion::new(
        "abort fraction",
        fraction <= config.allowances.abort_fraction,
        format!("{aborted} of {} replicas aborted", config.replicas),
    ));
    Ok(MeanFieldReport {
        seed,
        replicas: config.replicas,
        aborted,
        allowance: config.allowances.mean_field,
        centers: grid.centers().collect(),
        clamp_fraction,
        times: out,
        assertions,
    })
}
