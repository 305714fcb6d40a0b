//! Goodness-of-fit checks of the dual-process samplers and the noise jump law.

use serde::{Deserialize, Serialize};

use super::{fmt_f64, Assertion, Executor, Table};
use crate::config::ExperimentConfig;
use crate::dual::{sample_jump_height, sample_jump_location, sample_waiting_time};
use crate::error::Result;
use crate::model::{Field, ModelParams};
use crate::noise::LevyMeasure;
use crate::special::{chi_square_test, ks_p_value, ks_statistic};
use crate::stats::mean_and_se;

pub const SAMPLER_DRAWS: u64 = 100_000;
pub const MIN_P_VALUE: f64 = 0.01;
const BATCH: u64 = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerRow {
    pub check: String,
    pub n: Option<u64>,
    /// p-value, or `|mean - target| / se` for the waiting-time check.
    pub statistic: f64,
    pub expected: f64,
    pub observed: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerReport {
    pub seed: u64,
    pub draws: u64,
    pub rows: Vec<SamplerRow>,
    pub assertions: Vec<Assertion>,
}

impl SamplerReport {
    pub fn table(&self) -> Table {
        Table {
            columns: vec!["check", "n", "statistic", "expected", "observed", "pass"],
            rows: self
                .rows
                .iter()
                .map(|r| {
                    vec![
                        r.check.clone(),
                        r.n.map(|n| n.to_string()).unwrap_or_default(),
                        fmt_f64(r.statistic),
                        fmt_f64(r.expected),
                        fmt_f64(r.observed),
                        r.pass.to_string(),
                    ]
                })
                .collect(),
        }
    }
}

/// `SAMPLER_DRAWS` draws of `draw`, in batches so that each batch owns one
/// stream and the result does not depend on the worker count.
fn draws<F>(exec: &Executor, seed: u64, tag: u64, draw: F) -> Vec<f64>
where
    F: Fn(&mut rand_chacha::ChaCha8Rng) -> f64 + Sync + Send,
{
    exec.map_replicas(SAMPLER_DRAWS / BATCH, |b| {
        let mut rng = super::aux_stream(seed, (tag << 16) | b).rng();
        (0..BATCH).map(|_| draw(&mut rng)).collect::<Vec<f64>>()
    })
    .concat()
}

pub fn run_sampler_check(config: &ExperimentConfig, exec: &Executor) -> Result<SamplerReport> {
    let seed = config.seed;
    let base = config.model;
    let mut rows = Vec::new();

    for (j, &n) in config.n_list.iter().enumerate() {
        let params = ModelParams { n, ..base };
        let tag = 2 * j as u64 + 1;
        let ab = params.alphabeta();
        let nf = n as f64;

        let mut heights = draws(exec, seed, tag, |rng| sample_jump_height(&params, rng));
        let d = ks_statistic(&mut heights, |b| if b < 1.0 / nf { 0.0 } else { 1.0 - (nf * b).powf(-ab) });
        let p = ks_p_value(d, heights.len());
        let median = heights[heights.len() / 2];
        rows.push(SamplerRow {
            check: "jump_height_ks".into(),
            n: Some(n),
            statistic: p,
            expected: 2f64.powf(1.0 / ab) / nf,
            observed: median,
            pass: p > MIN_P_VALUE,
        });

        let waits = draws(exec, seed, tag + 1, |rng| sample_waiting_time(&params, rng));
        let (mean, se) = mean_and_se(&waits);
        let target = 1.0 / params.clock_rate();
        let z = (mean - target).abs() / se;
        rows.push(SamplerRow {
            check: "waiting_time_mean".into(),
            n: Some(n),
            statistic: z,
            expected: target,
            observed: mean,
            pass: z <= 3.0,
        });
    }

    // two cells holding 1 and 2; everything else empty
    let grid = base.grid;
    let mid = grid.cells / 2;
    let mut values = vec![0.0; grid.cells];
    values[mid] = 1.0;
    values[mid + 1] = 2.0;
    let z = Field::from_values(grid, values)?;
    let alpha = base.alpha;
    let second = grid.center(mid + 1);
    let hits = draws(exec, seed, 0xFFF0, |rng| {
        let x = sample_jump_location(&z, alpha, rng).expect("field is nonzero");
        f64::from(u8::from(x == second))
    });
    let k = hits.iter().filter(|h| **h == 1.0).count() as u64;
    let w = 2f64.powf(alpha);
    let p_second = w / (1.0 + w);
    let (_, p) = chi_square_test(&[hits.len() as u64 - k, k], &[1.0 - p_second, p_second]);
    rows.push(SamplerRow {
        check: "jump_location_chi_square".into(),
        n: None,
        statistic: p,
        expected: p_second,
        observed: k as f64 / hits.len() as f64,
        pass: p > MIN_P_VALUE,
    });

    // noise jump sizes above eps
    let measure = LevyMeasure::new(alpha)?;
    let eps = base.eps_jump;
    let mut sizes = draws(exec, seed, 0xFFF1, |rng| measure.sample_jump(eps, rng));
    let d = ks_statistic(&mut sizes, |x| if x < eps { 0.0 } else { 1.0 - (x / eps).powf(-alpha) });
    let p = ks_p_value(d, sizes.len());
    rows.push(SamplerRow {
        check: "noise_jump_size_ks".into(),
        n: None,
        statistic: p,
        expected: eps * 2f64.powf(1.0 / alpha),
        observed: sizes[sizes.len() / 2],
        pass: p > MIN_P_VALUE,
    });

    let assertions = rows
        .iter()
        .map(|r| {
            let name = match r.n {
                Some(n) => format!("{} n={n}", r.check),
                None => r.check.clone(),
            };
            Assertion::new(
                name,
                r.pass,
                format!("statistic {:.4}, expected {:.6}, observed {:.6}", r.statistic, r.expected, r.observed),
            )
        })
        .collect();
    Ok(SamplerReport {
        seed,
        draws: SAMPLER_DRAWS,
        rows,
        assertions,
    })
}
