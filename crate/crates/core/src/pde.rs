//! Semilinear flow `dv/dt = 1/2 v'' - c v^alpha` between jumps of the dual
//! process, solved by Strang splitting with an exact reaction substep.

use crate::error::{Error, Result};
use crate::heat::{HeatKernel, SemigroupPlan};
use crate::model::Field;

/// Exact solution of `dv/dt = -c v^alpha` over `dt`, cell-wise, in place.
fn react(values: &mut [f64], c: f64, alpha: f64, dt: f64) {
    if c == 0.0 || dt == 0.0 {
        return;
    }
    let k = c * (alpha - 1.0) * dt;
    let e = -1.0 / (alpha - 1.0);
    for v in values.iter_mut() {
        if *v > 0.0 {
            *v = (v.powf(1.0 - alpha) + k).powf(e);
        } else {
            *v = 0.0;
        }
    }
}

/// `v' = (v^{1-alpha} + c (alpha - 1) dt)^{-1/(alpha - 1)}` for `v > 0`,
/// `0` for `v = 0`.
pub fn reaction_substep(v: &Field, c: f64, alpha: f64, dt: f64) -> Result<Field> {
    check_reaction(v, c, alpha, dt)?;
    let mut out = v.clone();
    react(out.values_mut(), c, alpha, dt);
    Ok(out)
}

fn check_reaction(v: &Field, c: f64, alpha: f64, dt: f64) -> Result<()> {
    if !(c >= 0.0 && c.is_finite()) {
        return Err(Error::invalid("sink", "coefficient must be finite and non-negative"));
    }
    if !(alpha > 1.0) {
        return Err(Error::invalid("alpha", "reaction exponent must exceed 1"));
    }
    if !(dt >= 0.0) {
        return Err(Error::invalid("dt", "must be non-negative"));
    }
    if !v.is_nonnegative() {
        return Err(Error::invalid("v", "field must be non-negative"));
    }
    Ok(())
}

/// One Strang step `R(dt/2) H(dt) R(dt/2)` with precomputed heat kernel.
#[derive(Debug, Clone)]
pub struct PdeStepper {
    plan: SemigroupPlan,
    kernel: HeatKernel,
    sink: f64,
    alpha: f64,
    dt: f64,
}

impl PdeStepper {
    pub fn new(plan: &SemigroupPlan, alpha: f64, sink: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid("dt", "must be positive"));
        }
        if !(sink >= 0.0 && sink.is_finite()) {
            return Err(Error::invalid("sink", "coefficient must be finite and non-negative"));
        }
        if !(alpha > 1.0) {
            return Err(Error::invalid("alpha", "reaction exponent must exceed 1"));
        }
        Ok(PdeStepper {
            plan: plan.clone(),
            kernel: plan.kernel(dt),
            sink,
            alpha,
            dt,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn sink(&self) -> f64 {
        self.sink
    }

    pub fn plan(&self) -> &SemigroupPlan {
        &self.plan
    }

    /// Advances `v` by one full step.
    pub fn step(&self, v: &mut Field) {
        react(v.values_mut(), self.sink, self.alpha, 0.5 * self.dt);
        self.kernel.apply_in_place(v);
        react(v.values_mut(), self.sink, self.alpha, 0.5 * self.dt);
    }

    /// Advances `v` by one step of length `h` (typically `h < dt`).
    pub fn step_by(&self, v: &mut Field, h: f64) {
        if h == self.dt {
            return self.step(v);
        }
        react(v.values_mut(), self.sink, self.alpha, 0.5 * h);
        self.plan.kernel(h).apply_in_place(v);
        react(v.values_mut(), self.sink, self.alpha, 0.5 * h);
    }
}

/// One Strang step of `dv/dt = 1/2 v'' - c v^alpha`. With `c = 0` this is
/// exactly the heat semigroup.
pub fn pde_step(v: &Field, dt: f64, sink: f64, alpha: f64) -> Result<Field> {
    check_reaction(v, sink, alpha, dt)?;
    let stepper = PdeStepper::new(&SemigroupPlan::new(*v.grid()), alpha, sink, dt)?;
    let mut out = v.clone();
    stepper.step(&mut out);
    Ok(out)
}

/// PDE evolution over `[0, duration]` together with the trace of
/// `||v_r||_alpha^alpha` at every step end.
#[derive(Debug, Clone, PartialEq)]
pub struct PdeSegment {
    pub start: Field,
    pub duration: f64,
    /// Whole steps of the stepper's `dt`, followed by one step of `partial`
    /// when `partial > 0`.
    pub full_steps: usize,
    pub partial: f64,
    pub start_norm: f64,
    /// `(r, ||v_r||_alpha^alpha)` at each step end, `r` increasing.
    pub norm_trace: Vec<(f64, f64)>,
    pub end: Field,
}

impl PdeSegment {
    /// Trapezoidal `int_0^r ||v_s||_alpha^alpha ds` at each trace point.
    pub fn cumulative_norm_integral(&self) -> Vec<f64> {
        let mut acc = 0.0;
        let mut prev = (0.0, self.start_norm);
        self.norm_trace
            .iter()
            .map(|&(r, n)| {
                acc += 0.5 * (r - prev.0) * (n + prev.1);
                prev = (r, n);
                acc
            })
            .collect()
    }

    /// Trapezoidal integral over the whole segment.
    pub fn norm_integral(&self) -> f64 {
        self.cumulative_norm_integral().last().copied().unwrap_or(0.0)
    }
}

/// Runs whole steps of `stepper.dt()` followed by one partial step to reach
/// `duration` exactly.
pub fn solve_segment_with(stepper: &PdeStepper, v0: &Field, duration: f64) -> Result<PdeSegment> {
    if !(duration >= 0.0 && duration.is_finite()) {
        return Err(Error::invalid("duration", "must be finite and non-negative"));
    }
    if !v0.is_nonnegative() {
        return Err(Error::invalid("v0", "field must be non-negative"));
    }
    let dt = stepper.dt();
    let full = full_steps(duration, dt);
    let rest = duration - full as f64 * dt;
    Ok(run_steps(stepper, v0, full, rest.max(0.0)))
}

/// `full` whole steps, then one step of `partial` if it is positive.
pub fn run_steps(stepper: &PdeStepper, v0: &Field, full: usize, partial: f64) -> PdeSegment {
    let alpha = stepper.alpha();
    let dt = stepper.dt();
    let mut v = v0.clone();
    let mut trace = Vec::with_capacity(full + 1);
    for k in 1..=full {
        stepper.step(&mut v);
        trace.push((k as f64 * dt, v.lp_norm_pow(alpha)));
    }
    let mut duration = full as f64 * dt;
    if partial > 0.0 {
        stepper.step_by(&mut v, partial);
        duration += partial;
        trace.push((duration, v.lp_norm_pow(alpha)));
    }
    PdeSegment {
        start: v0.clone(),
        duration,
        full_steps: full,
        partial,
        start_norm: v0.lp_norm_pow(alpha),
        norm_trace: trace,
        end: v,
    }
}

impl PdeSegment {
    /// Recomputes the segment from its start field with `stepper`.
    pub fn replay(&self, stepper: &PdeStepper) -> PdeSegment {
        run_steps(stepper, &self.start, self.full_steps, self.partial)
    }
}

/// Number of whole steps of length `dt` that fit in `duration`, with a
/// relative slack so that `k * dt` round-off does not leave a sliver step.
pub(crate) fn full_steps(duration: f64, dt: f64) -> usize {
    let q = duration / dt;
    let k = (q + 1e-9).floor();
    k.max(0.0) as usize
}

pub fn solve_segment(v0: &Field, duration: f64, dt: f64, sink: f64, alpha: f64) -> Result<PdeSegment> {
    let stepper = PdeStepper::new(&SemigroupPlan::new(*v0.grid()), alpha, sink, dt)?;
    solve_segment_with(&stepper, v0, duration)
}
