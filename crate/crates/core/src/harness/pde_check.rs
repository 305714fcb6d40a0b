//! Accuracy checks of the Strang splitting solver.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{fmt_f64, Assertion, Executor, Table};
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::heat::SemigroupPlan;
use crate::model::{Field, GridSpec, ModelParams};
use crate::pde::{reaction_substep, solve_segment_with, PdeStepper};
use crate::shape::Shape;

/// Step sizes of the self-convergence study. They resolve the heat kernel on
/// desk-scale grids, so `P_h` composes to `P_T` up to round-off.
pub const CONVERGENCE_STEPS: [f64; 3] = [0.05, 0.025, 0.0125];
pub const HEAT_TOLERANCE: f64 = 1e-10;
pub const REACTION_TOLERANCE: f64 = 1e-8;
pub const MIN_ORDER: f64 = 1.8;
pub const RANDOM_PAIRS: u64 = 100;
/// Round-off slack of the comparison check, relative to the larger sup-norm.
pub const COMPARISON_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdeCheckRow {
    pub check: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdeReport {
    pub seed: u64,
    pub horizon: f64,
    pub sink: f64,
    /// Sup distance between `T / dt` heat steps of the configured `dt` and a
    /// single `P_T`; below `dx^2` the sampled kernel is not an exact semigroup.
    pub fine_step_heat_deviation: f64,
    pub self_convergence_errors: Vec<f64>,
    pub rows: Vec<PdeCheckRow>,
    pub assertions: Vec<Assertion>,
}

impl PdeReport {
    pub fn table(&self) -> Table {
        Table {
            columns: vec!["check", "value", "tolerance", "pass"],
            rows: self
                .rows
                .iter()
                .map(|r| vec![r.check.clone(), fmt_f64(r.value), fmt_f64(r.tolerance), r.pass.to_string()])
                .collect(),
        }
    }
}

/// Classical RK4 for `v' = -c v^alpha`.
pub fn rk4_reaction(v: f64, c: f64, alpha: f64, t: f64, steps: usize) -> f64 {
    let f = |v: f64| -c * v.max(0.0).powf(alpha);
    let h = t / steps as f64;
    let mut v = v;
    for _ in 0..steps {
        let k1 = f(v);
        let k2 = f(v + 0.5 * h * k1);
        let k3 = f(v + 0.5 * h * k2);
        let k4 = f(v + h * k3);
        v += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    v
}

pub fn run_pde_convergence(config: &ExperimentConfig, exec: &Executor) -> Result<PdeReport> {
    let params = config.model;
    let grid = params.grid;
    let plan = SemigroupPlan::new(grid);
    let alpha = params.alpha;
    let horizon = config.final_time();
    let n_max = *config.n_list.last().expect("validated n_list");
    let sink = ModelParams { n: n_max, ..params }.sink_coefficient();
    let phi = match config.phi {
        Shape::Zero => Shape::unit_gaussian().sample(grid),
        s => s.sample(grid),
    };
    let mut rows = Vec::new();
    let mut push = |check: String, value: f64, tolerance: f64, pass: bool| {
        rows.push(PdeCheckRow {
            check,
            value,
            tolerance,
            pass,
        })
    };

    // (a) without the sink the solver is the heat flow
    let exact = plan.apply(&phi, horizon);
    let mut heat_dev: f64 = 0.0;
    for &h in &CONVERGENCE_STEPS {
        let stepper = PdeStepper::new(&plan, alpha, 0.0, h)?;
        let end = solve_segment_with(&stepper, &phi, horizon)?.end;
        heat_dev = heat_dev.max(end.sup_distance(&exact)?);
    }
    push("zero_sink_vs_semigroup".into(), heat_dev, HEAT_TOLERANCE, heat_dev <= HEAT_TOLERANCE);
    let fine = solve_segment_with(&PdeStepper::new(&plan, alpha, 0.0, params.dt)?, &phi, horizon)?.end;
    let fine_step_heat_deviation = fine.sup_distance(&exact)?;

    // (b) exact reaction substep against RK4 at dt/1000
    let mut reaction_err: f64 = 0.0;
    let probe_values: Vec<f64> = phi.values().iter().cloned().chain((0..=30).map(|i| i as f64 * 0.1)).collect();
    let probe = Field::from_values(GridSpec::new(0.0, 1.0, probe_values.len())?, probe_values)?;
    for n in &config.n_list {
        let c = ModelParams { n: *n, ..params }.sink_coefficient();
        let exact = reaction_substep(&probe, c, alpha, params.dt)?;
        for (v, e) in probe.values().iter().zip(exact.values()) {
            reaction_err = reaction_err.max((rk4_reaction(*v, c, alpha, params.dt, 1000) - e).abs());
        }
    }
    push(
        "reaction_vs_rk4".into(),
        reaction_err,
        REACTION_TOLERANCE,
        reaction_err <= REACTION_TOLERANCE,
    );

    // (c) Strang self-convergence
    let ends = CONVERGENCE_STEPS
        .iter()
        .map(|&h| Ok(solve_segment_with(&PdeStepper::new(&plan, alpha, sink, h)?, &phi, horizon)?.end))
        .collect::<Result<Vec<Field>>>()?;
    let e1 = ends[0].sup_distance(&ends[1])?;
    let e2 = ends[1].sup_distance(&ends[2])?;
    let order = (e1 / e2).log2();
    push("strang_order".into(), order, MIN_ORDER, order >= MIN_ORDER);

    // (d) comparison principle and positivity on random ordered pairs
    let seed = config.seed;
    let outcomes = exec.try_map_replicas(RANDOM_PAIRS, |k| {
        let mut rng = super::aux_stream(seed, 0x100 + k).rng();
        let c: f64 = rng.random_range(0.0..4.0);
        let base: Vec<f64> = (0..grid.cells).map(|_| rng.random_range(0.0..3.0)).collect();
        let hi: Vec<f64> = base.iter().map(|b| b + rng.random_range(0.0..1.0)).collect();
        let lo = Field::from_values(grid, base)?;
        let hi = Field::from_values(grid, hi)?;
        let stepper = PdeStepper::new(&plan, alpha, c, params.dt)?;
        let steps = 50.0 * params.dt;
        let a = solve_segment_with(&stepper, &lo, steps)?.end;
        let b = solve_segment_with(&stepper, &hi, steps)?.end;
        let slack = COMPARISON_SLACK * b.sup().max(1.0);
        let ordered = a.values().iter().zip(b.values()).all(|(x, y)| *x <= *y + slack);
        let excess = a
            .values()
            .iter()
            .zip(b.values())
            .map(|(x, y)| x - y)
            .fold(f64::NEG_INFINITY, f64::max);
        Ok((ordered && a.is_nonnegative() && b.is_nonnegative(), excess))
    })?;
    let failures = outcomes.iter().filter(|o| !o.0).count();
    let worst = outcomes.iter().map(|o| o.1).fold(f64::NEG_INFINITY, f64::max);
    push("comparison_failures".into(), failures as f64, 0.0, failures == 0);

    let assertions = rows
        .iter()
        .map(|r| Assertion::new(r.check.clone(), r.pass, format!("value {:.3e}, tolerance {:.3e}", r.value, r.tolerance)))
        .chain(std::iter::once(Assertion::new(
            "comparison_worst_excess",
            failures == 0,
            format!("max_x (lo - hi) over {RANDOM_PAIRS} pairs = {worst:.3e}"),
        )))
        .collect();
    Ok(PdeReport {
        seed,
        horizon,
        sink,
        fine_step_heat_deviation,
        self_convergence_errors: vec![e1, e2],
        rows,
        assertions,
    })
}
