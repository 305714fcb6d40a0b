//! Cell-max `q`-th moments of `Y_t` and the running martingale residual.

use serde::{Deserialize, Serialize};

use super::{fmt_f64, Assertion, Executor, Table};
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::heat::SemigroupPlan;
use crate::she::{simulate_y_path_with, MartingaleProbe, YStepper};
use crate::stats::mean_and_se;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentRow {
    pub t: f64,
    /// `max_x E Y_t(x)^q`.
    pub moment: f64,
    pub envelope: f64,
    pub martingale_mean: f64,
    pub martingale_se: f64,
    /// `mean / se`, zero when both vanish.
    pub z_score: f64,
    pub pass: bool,
}

/// `ln m(t) <= intercept + shift + slope t`, fitted by least squares and
/// shifted up to touch the highest point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogLinearEnvelope {
    pub intercept: f64,
    pub slope: f64,
    pub shift: f64,
    pub rms_residual: f64,
}

impl LogLinearEnvelope {
    pub fn fit(points: &[(f64, f64)]) -> Self {
        let k = points.len() as f64;
        let mt = points.iter().map(|p| p.0).sum::<f64>() / k;
        let my = points.iter().map(|p| p.1).sum::<f64>() / k;
        let sxx: f64 = points.iter().map(|p| (p.0 - mt).powi(2)).sum();
        let sxy: f64 = points.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
        let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
        let intercept = my - slope * mt;
        let residuals: Vec<f64> = points.iter().map(|p| p.1 - intercept - slope * p.0).collect();
        let shift = residuals.iter().cloned().fold(0.0, f64::max);
        let rms_residual = (residuals.iter().map(|r| r * r).sum::<f64>() / k).sqrt();
        LogLinearEnvelope {
            intercept,
            slope,
            shift,
            rms_residual,
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        (self.intercept + self.shift + self.slope * t).exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub seed: u64,
    pub replicas: u64,
    pub aborted: u64,
    pub q: f64,
    pub envelope: Option<LogLinearEnvelope>,
    pub rows: Vec<MomentRow>,
    pub assertions: Vec<Assertion>,
}

impl MomentReport {
    pub fn table(&self) -> Table {
        Table {
            columns: vec!["t", "moment", "envelope", "martingale_mean", "martingale_se", "z_score", "pass"],
            rows: self
                .rows
                .iter()
                .map(|r| {
                    vec![
                        fmt_f64(r.t),
                        fmt_f64(r.moment),
                        fmt_f64(r.envelope),
                        fmt_f64(r.martingale_mean),
                        fmt_f64(r.martingale_se),
                        fmt_f64(r.z_score),
                        r.pass.to_string(),
                    ]
                })
                .collect(),
        }
    }
}

pub fn run_moment_and_martingale_suite(config: &ExperimentConfig, exec: &Executor) -> Result<MomentReport> {
    let params = config.model;
    let grid = params.grid;
    let plan = SemigroupPlan::new(grid);
    let stepper = YStepper::new(&plan, &params)?;
    let phi = config.phi.sample(grid);
    let probe = MartingaleProbe::new(config.psi.sample(grid), config.psi.half_laplacian(grid), params.alpha)?;
    let q = config.moments.q;
    let seed = config.seed;

    let mut times: Vec<f64> = config.moments.times.iter().chain(&config.output_times).cloned().collect();
    times.sort_by(f64::total_cmp);
    times.dedup_by(|a, b| (*a - *b).abs() <= 1e-12);

    let paths = exec.try_map_replicas(config.replicas, |r| {
        let mut rng = super::y_stream(seed, r).rng();
        simulate_y_path_with(&stepper, &phi, &params, &times, Some(&probe), &mut rng)
    })?;
    let kept: Vec<_> = paths.iter().filter(|p| !p.is_aborted()).collect();
    let aborted = (paths.len() - kept.len()) as u64;
    let path_times = kept.first().map(|p| p.times.clone()).unwrap_or_else(|| vec![0.0]);

    let mut moments = Vec::with_capacity(path_times.len());
    let mut residuals = Vec::with_capacity(path_times.len());
    for i in 0..path_times.len() {
        let mut sum = vec![0.0; grid.cells];
        for p in &kept {
            for (s, v) in sum.iter_mut().zip(p.fields[i].values()) {
                *s += v.powf(q);
            }
        }
        let k = kept.len().max(1) as f64;
        moments.push(sum.iter().cloned().fold(0.0, f64::max) / k);
        let m: Vec<f64> = kept.iter().map(|p| p.martingale[i]).collect();
        residuals.push(mean_and_se(&m));
    }

    let points: Vec<(f64, f64)> = path_times
        .iter()
        .zip(&moments)
        .filter(|(_, m)| **m > 0.0)
        .map(|(t, m)| (*t, m.ln()))
        .collect();
    let envelope = (!points.is_empty()).then(|| LogLinearEnvelope::fit(&points));

    let mut rows = Vec::new();
    let mut assertions = Vec::new();
    for (i, &t) in path_times.iter().enumerate() {
        let (mean, se) = residuals[i];
        let z_score = if se > 0.0 { mean / se } else if mean == 0.0 { 0.0 } else { f64::INFINITY.copysign(mean) };
        let pass = mean.abs() <= 3.0 * se;
        let moment = moments[i];
        let env = envelope.map(|e| e.value(t)).unwrap_or(0.0);
        if t > 0.0 {
            assertions.push(Assertion::new(
                format!("martingale residual at t={t}"),
                pass,
                format!("mean {mean:.3e}, se {se:.3e}, z {z_score:.2}"),
            ));
        }
        if config.moments.times.iter().any(|s| (s - t).abs() <= 1e-12) {
            assertions.push(Assertion::new(
                format!("moment finite at t={t}"),
                moment.is_finite() && moment <= env * (1.0 + 1e-12),
                format!("max_x E Y^{q} = {moment:.5e}, envelope {env:.5e}"),
            ));
        }
        rows.push(MomentRow {
            t,
            moment,
            envelope: env,
            martingale_mean: mean,
            martingale_se: se,
            z_score: if z_score.is_finite() { z_score } else { f64::MAX.copysign(z_score) },
            pass,
        });
    }
    assertions.push(Assertion::new(
        "log-linear envelope",
        envelope.is_some_and(|e| e.intercept.is_finite() && e.slope.is_finite()),
        match envelope {
            Some(e) => format!(
                "ln m(t) <= {:.4} + {:.4} t (rms residual {:.2e})",
                e.intercept + e.shift,
                e.slope,
                e.rms_residual
            ),
            None => "no positive moments".to_string(),
        },
    ));
    assertions.push(Assertion::new(
        "abort fraction",
        aborted as f64 / config.replicas as f64 <= config.allowances.abort_fraction,
        format!("{aborted} of {} replicas aborted", config.replicas),
    ));
    Ok(MomentReport {
        seed,
        replicas: config.replicas,
        aborted,
        q,
        envelope,
        rows,
        assertions,
    })
}
