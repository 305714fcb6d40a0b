//! The approximating dual process: the PDE flow between jumps, exponential
//! clocks in internal time, Pareto jump heights above `1/n`, jump locations
//! drawn from `Z^alpha / ||Z||_alpha^alpha`, and the time change
//! `tau(r) = c int_0^r ||Z_s||_alpha^alpha ds`.

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{Error, Result};
use crate::heat::SemigroupPlan;
use crate::model::{Field, ModelParams};
use crate::noise::open_unit;
use crate::pde::{full_steps, PdeSegment, PdeStepper};
use crate::stats::MCSummary;

/// Mass below which the dual field counts as extinct.
pub const EXTINCTION_MASS: f64 = 1e-12;

/// Relative width at which the jump-time bisection stops.
const BISECTION_TOL: f64 = 1e-10;

/// Exponential clock increment with rate `n^{ab} (ab - 1) / Gamma(2 - ab)`.
pub fn sample_waiting_time<R: Rng + ?Sized>(params: &ModelParams, rng: &mut R) -> f64 {
    let e: f64 = Exp1.sample(rng);
    e / params.clock_rate()
}

/// Inverse tail of the jump-height law: `(1/n) u^{-1/ab}`.
pub fn jump_height_from_uniform(params: &ModelParams, u: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::invalid("u", "must lie strictly inside (0, 1)"));
    }
    Ok(u.powf(-1.0 / params.alphabeta()) / params.n as f64)
}

/// Jump height with tail `P(S >= b) = (n b)^{-ab}` for `b >= 1/n`.
pub fn sample_jump_height<R: Rng + ?Sized>(params: &ModelParams, rng: &mut R) -> f64 {
    open_unit(rng).powf(-1.0 / params.alphabeta()) / params.n as f64
}

/// Cell center drawn with probability `z_i^alpha / sum_j z_j^alpha`.
pub fn sample_jump_location<R: Rng + ?Sized>(z: &Field, alpha: f64, rng: &mut R) -> Result<f64> {
    let mut cumulative = Vec::with_capacity(z.values().len());
    let mut total = 0.0;
    for &v in z.values() {
        if v > 0.0 {
            total += v.powf(alpha);
        }
        cumulative.push(total);
    }
    if !(total > 0.0) {
        return Err(Error::ZeroField);
    }
    let target = rng.random::<f64>() * total;
    let i = cumulative.partition_point(|&c| c <= target);
    Ok(z.grid().center(i.min(cumulative.len() - 1)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpRecord {
    /// Real time of the jump, the inverse time change at `internal_time`.
    pub time: f64,
    /// Clock value `T_k` that fired.
    pub internal_time: f64,
    /// `tau` recovered from the trapezoidal trace at `time`.
    pub tau: f64,
    pub height: f64,
    pub location: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// Real time reached `t_end`.
    Horizon,
    /// Internal time reached `k_n = ln n` before `t_end`.
    InternalTime,
    /// Mass fell below [`EXTINCTION_MASS`]; `tau` is frozen from there on.
    Extinction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualTrajectory {
    pub params: ModelParams,
    pub t_end: f64,
    pub jumps: Vec<JumpRecord>,
    /// PDE pieces between jumps, in order; the last one ends at `stop_time`
    /// (or at extinction).
    pub segments: Vec<PdeSegment>,
    /// `(real time, tau)` at every step end.
    pub tau_trace: Vec<(f64, f64)>,
    pub max_norm: f64,
    pub stop: StopReason,
    /// `min(t_end, gamma(k_n))`.
    pub stop_time: f64,
    pub extinction_time: Option<f64>,
    pub final_field: Field,
}

impl DualTrajectory {
    pub fn stopped_early(&self) -> bool {
        self.stop == StopReason::InternalTime
    }

    pub fn final_tau(&self) -> f64 {
        self.tau_trace.last().map(|p| p.1).unwrap_or(0.0)
    }
}

/// Reusable per-grid state for dual simulations.
#[derive(Debug, Clone)]
pub struct DualSimulator {
    params: ModelParams,
    stepper: PdeStepper,
}

impl DualSimulator {
    pub fn new(plan: &SemigroupPlan, params: &ModelParams) -> Result<Self> {
        let stepper = PdeStepper::new(plan, params.alpha, params.sink_coefficient(), params.dt)?;
        Ok(DualSimulator {
            params: *params,
            stepper,
        })
    }

    pub fn stepper(&self) -> &PdeStepper {
        &self.stepper
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn simulate<R: Rng + ?Sized>(&self, psi: &Field, t_end: f64, rng: &mut R) -> Result<DualTrajectory> {
        let p = self.params;
        self.simulate_with_clock(psi, t_end, rng, |r| sample_waiting_time(&p, r))
    }

    /// Runs a trajectory with clock increments drawn by `clock`.
    pub fn simulate_with_clock<R, C>(
        &self,
        psi: &Field,
        t_end: f64,
        rng: &mut R,
        mut clock: C,
    ) -> Result<DualTrajectory>
    where
        R: Rng + ?Sized,
        C: FnMut(&mut R) -> f64,
    {
        if !psi.is_nonnegative() {
            return Err(Error::invalid("psi", "must be non-negative"));
        }
        if !(t_end >= 0.0 && t_end.is_finite()) {
            return Err(Error::invalid("t_end", "must be finite and non-negative"));
        }
        let params = self.params;
        let alpha = params.alpha;
        let dt = self.stepper.dt();
        let rate_factor = params.time_change_factor;
        let k_n = params.k_n();

        let mut z = psi.clone();
        let mut norm = z.lp_norm_pow(alpha);
        let mut tau = 0.0;
        let mut time = 0.0;
        let mut next_clock = clock(rng);
        let mut jumps = Vec::new();
        let mut segments = Vec::new();
        let mut tau_trace = vec![(0.0, 0.0)];
        let mut max_norm = norm;
        let mut extinction_time = None;

        let stop = 'outer: loop {
            if k_n <= tau {
                break StopReason::InternalTime;
            }
            if z.integrate() < EXTINCTION_MASS {
                extinction_time = Some(time);
                break StopReason::Extinction;
            }
            // one PDE segment from `time`, cut at the first crossing
            let seg_start = z.clone();
            let seg_time = time;
            let seg_norm = norm;
            let remaining = t_end - seg_time;
            let full = full_steps(remaining, dt);
            let rest = (remaining - full as f64 * dt).max(0.0);
            let total_steps = full + usize::from(rest > 0.0);
            let mut trace = Vec::with_capacity(total_steps.min(1 << 16));
            let mut elapsed = 0.0;

            let close = |trace: Vec<(f64, f64)>, end: Field, full: usize, partial: f64| PdeSegment {
                start: seg_start.clone(),
                duration: full as f64 * dt + partial,
                full_steps: full,
                partial,
                start_norm: seg_norm,
                norm_trace: trace,
                end,
            };

            for j in 0..total_steps {
                let h = if j < full { dt } else { rest };
                let mut next = z.clone();
                self.stepper.step_by(&mut next, h);
                let next_norm = next.lp_norm_pow(alpha);
                let dtau = rate_factor * 0.5 * h * (norm + next_norm);
                let target = next_clock.min(k_n);

                if tau + dtau >= target {
                    // invert the per-step trapezoidal tau on [0, h]
                    let tau_at = |s: f64| tau + rate_factor * (s * norm + 0.5 * s * s / h * (next_norm - norm));
                    let (mut lo, mut hi) = (0.0, h);
                    while hi - lo > BISECTION_TOL * h {
                        let mid = 0.5 * (lo + hi);
                        if tau_at(mid) < target {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                    }
                    let s = hi;
                    let mut cross = z.clone();
                    self.stepper.step_by(&mut cross, s);
                    let cross_norm = cross.lp_norm_pow(alpha);
                    tau += rate_factor * 0.5 * s * (norm + cross_norm);
                    time = seg_time + elapsed + s;
                    max_norm = max_norm.max(cross_norm);
                    trace.push((elapsed + s, cross_norm));
                    tau_trace.push((time, tau));
                            segments.push(close(trace, cross.clone(), j, s));

                    if next_clock > k_n {
                        z = cross;
                        break 'outer StopReason::InternalTime;
                    }
                    let location = match sample_jump_location(&cross, alpha, rng) {
                        Ok(u) => u,
                        Err(_) => {
                            z = cross;
                            extinction_time = Some(time);
                            break 'outer StopReason::Extinction;
                        }
                    };
                    let height = sample_jump_height(&params, rng);
                    cross.deposit(location, height);
                    jumps.push(JumpRecord {
                        time,
                        internal_time: next_clock,
                        tau,
                        height,
                        location,
                    });
                    z = cross;
                    norm = z.lp_norm_pow(alpha);
                    max_norm = max_norm.max(norm);
                    next_clock += clock(rng);
                    continue 'outer;
                }

                z = next;
                norm = next_norm;
                tau += dtau;
                elapsed = if j < full { (j + 1) as f64 * dt } else { full as f64 * dt + rest };
                time = seg_time + elapsed;
                max_norm = max_norm.max(norm);
                trace.push((elapsed, norm));
                tau_trace.push((time, tau));

                if z.integrate() < EXTINCTION_MASS {
                    let partial = if j < full { 0.0 } else { rest };
                    segments.push(close(trace, z.clone(), (j + 1).min(full), partial));
                    extinction_time = Some(time);
                    break 'outer StopReason::Extinction;
                }
            }
            let partial = if rest > 0.0 { rest } else { 0.0 };
            segments.push(close(trace, z.clone(), full, partial));
            time = t_end;
            break StopReason::Horizon;
        };

        let stop_time = match stop {
            StopReason::InternalTime => time,
            _ => t_end,
        };
        Ok(DualTrajectory {
            params,
            t_end,
            jumps,
            segments,
            tau_trace,
            max_norm,
            stop,
            stop_time,
            extinction_time,
            final_field: z,
        })
    }
}

/// Simulates `Z^(n)` from `psi` up to `min(t_end, gamma(k_n))`.
pub fn simulate_dual_path<R: Rng + ?Sized>(
    psi: &Field,
    t_end: f64,
    params: &ModelParams,
    rng: &mut R,
) -> Result<DualTrajectory> {
    DualSimulator::new(&SemigroupPlan::new(*psi.grid()), params)?.simulate(psi, t_end, rng)
}

/// Mean and standard error of `exp(-<phi, Z_final>)`.
pub fn dual_exp_pairing_estimator(trajectories: &[DualTrajectory], phi: &Field, seed: u64) -> Result<MCSummary> {
    let values = trajectories
        .iter()
        .map(|t| Ok((-phi.pairing(&t.final_field)?).exp()))
        .collect::<Result<Vec<f64>>>()?;
    Ok(MCSummary::from_values(&values, 0, seed))
}
