//! Path simulation of `dY = 1/2 Y'' dt + Y^beta dL` through the thinned
//! Poisson form: jumps land in cell `i` at rate `Y_i^{alpha beta}` times the
//! Lévy tail above the cutoff, and the compensator is subtracted as a drift.

use rand::Rng;

use crate::error::{Error, Result};
use crate::heat::{HeatKernel, SemigroupPlan};
use crate::model::{Field, ModelParams};
use crate::noise::{sample_poisson, LevyMeasure};
use crate::stats::MCSummary;

/// Paths whose mass exceeds this multiple of the initial mass are aborted.
pub const BLOW_UP_FACTOR: f64 = 1e6;

/// One explicit step of the thinned mild form on a fixed grid.
#[derive(Debug, Clone)]
pub struct YStepper {
    kernel: HeatKernel,
    measure: LevyMeasure,
    alphabeta: f64,
    dt: f64,
    eps: f64,
    jump_rate: f64,
    drift: f64,
}

impl YStepper {
    pub fn new(plan: &SemigroupPlan, params: &ModelParams) -> Result<Self> {
        Self::with_cutoff(plan, params.alpha, params.beta, params.dt, params.eps_jump)
    }

    /// `eps` may be `+inf`, which switches the noise off.
    pub fn with_cutoff(plan: &SemigroupPlan, alpha: f64, beta: f64, dt: f64, eps: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid("dt", "must be positive"));
        }
        if !(eps > 0.0) {
            return Err(Error::invalid("eps_jump", "must be positive"));
        }
        let measure = LevyMeasure::new(alpha)?;
        let dx = plan.grid().dx();
        Ok(YStepper {
            kernel: plan.kernel(dt),
            measure,
            alphabeta: alpha * beta,
            dt,
            eps,
            jump_rate: dt * dx * measure.tail_mass(eps),
            drift: dt * measure.first_moment_tail(eps),
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Advances `y` by one step in place and returns the mass removed by
    /// clamping negative cells to zero.
    pub fn step<R: Rng + ?Sized>(&self, y: &mut Field, rng: &mut R) -> f64 {
        let dx = y.grid().dx();
        let mut clamped = 0.0;
        for v in y.values_mut().iter_mut() {
            let yi = *v;
            if yi <= 0.0 {
                continue;
            }
            let w = yi.powf(self.alphabeta);
            let count = sample_poisson(self.jump_rate * w, rng);
            let jumps = if count > 0 {
                self.measure.sum_of_jumps(count, self.eps, rng)
            } else {
                0.0
            };
            let next = yi + jumps / dx - self.drift * w;
            if next < 0.0 {
                clamped -= next * dx;
                *v = 0.0;
            } else {
                *v = next;
            }
        }
        self.kernel.apply_in_place(y);
        clamped
    }
}

/// One step from `y`; returns the new field and the clamped mass.
pub fn simulate_y_step<R: Rng + ?Sized>(y: &Field, params: &ModelParams, rng: &mut R) -> Result<(Field, f64)> {
    if !y.is_nonnegative() {
        return Err(Error::invalid("y", "field must be non-negative"));
    }
    let stepper = YStepper::new(&SemigroupPlan::new(*y.grid()), params)?;
    let mut out = y.clone();
    let clamped = stepper.step(&mut out, rng);
    Ok((out, clamped))
}

/// Test function data for the running martingale residual
/// `M_t = e^{-<Y_t,psi>} - e^{-<Y_0,psi>}
///        - int_0^t e^{-<Y_s,psi>} (-<Y_s, psi''/2> + <Y_s^{ab}, psi^alpha>) ds`.
#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleProbe {
    pub psi: Field,
    pub half_laplacian: Field,
    psi_alpha: Field,
}

impl MartingaleProbe {
    pub fn new(psi: Field, half_laplacian: Field, alpha: f64) -> Result<Self> {
        psi.check_same_grid(&half_laplacian)?;
        if !psi.is_nonnegative() {
            return Err(Error::invalid("psi", "test function must be non-negative"));
        }
        let psi_alpha = psi.map(|v| v.powf(alpha));
        Ok(MartingaleProbe {
            psi,
            half_laplacian,
            psi_alpha,
        })
    }

    /// `(e^{-<y,psi>}, drift integrand)` at state `y`.
    fn evaluate(&self, y: &Field, alphabeta: f64) -> (f64, f64) {
        let dx = y.grid().dx();
        let mut pair = 0.0;
        let mut lap = 0.0;
        let mut react = 0.0;
        for (i, &v) in y.values().iter().enumerate() {
            if v <= 0.0 {
                continue;
            }
            pair += v * self.psi.values()[i];
            lap += v * self.half_laplacian.values()[i];
            react += v.powf(alphabeta) * self.psi_alpha.values()[i];
        }
        let e = (-pair * dx).exp();
        (e, e * (-lap * dx + react * dx))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PathStatus {
    Completed,
    /// Mass exceeded the blow-up guard at `time`.
    Aborted { time: f64, mass: f64 },
}

/// A simulated path of `Y` stored at the output times.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSample {
    pub params: ModelParams,
    /// Output times, starting at 0 and increasing.
    pub times: Vec<f64>,
    pub fields: Vec<Field>,
    /// Mass removed by clamping at each step.
    pub clamp_log: Vec<f64>,
    /// Martingale residual at each output time (empty without a probe).
    pub martingale: Vec<f64>,
    pub status: PathStatus,
}

impl PathSample {
    pub fn is_aborted(&self) -> bool {
        matches!(self.status, PathStatus::Aborted { .. })
    }

    pub fn field_at(&self, t: f64) -> Option<&Field> {
        self.time_index(t).map(|i| &self.fields[i])
    }

    pub fn time_index(&self, t: f64) -> Option<usize> {
        self.times.iter().position(|&s| (s - t).abs() <= 1e-9 * t.abs().max(1.0))
    }

    /// Total mass removed by clamping over the path.
    pub fn total_clamped(&self) -> f64 {
        self.clamp_log.iter().sum()
    }
}

/// Step counts for the requested output times, with 0 always included.
pub fn output_steps(times: &[f64], dt: f64) -> Result<Vec<usize>> {
    let mut steps = vec![0usize];
    for &t in times {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::invalid("output_times", "must be finite and non-negative"));
        }
        let k = (t / dt).round();
        if (k * dt - t).abs() > 1e-9 * t.max(1.0) {
            return Err(Error::invalid(
                "output_times",
                format!("{t} is not a multiple of dt = {dt}"),
            ));
        }
        steps.push(k as usize);
    }
    steps.sort_unstable();
    steps.dedup();
    Ok(steps)
}

/// Simulates `Y` from `phi` on `phi`'s grid, storing the field at 0 and at
/// each of `times` (multiples of `params.dt`).
pub fn simulate_y_path<R: Rng + ?Sized>(
    phi: &Field,
    params: &ModelParams,
    times: &[f64],
    probe: Option<&MartingaleProbe>,
    rng: &mut R,
) -> Result<PathSample> {
    let stepper = YStepper::new(&SemigroupPlan::new(*phi.grid()), params)?;
    simulate_y_path_with(&stepper, phi, params, times, probe, rng)
}

/// As [`simulate_y_path`] with a prebuilt stepper (shared across replicas).
pub fn simulate_y_path_with<R: Rng + ?Sized>(
    stepper: &YStepper,
    phi: &Field,
    params: &ModelParams,
    times: &[f64],
    probe: Option<&MartingaleProbe>,
    rng: &mut R,
) -> Result<PathSample> {
    simulate_guarded(stepper, phi, params, times, probe, BLOW_UP_FACTOR, rng)
}

fn simulate_guarded<R: Rng + ?Sized>(
    stepper: &YStepper,
    phi: &Field,
    params: &ModelParams,
    times: &[f64],
    probe: Option<&MartingaleProbe>,
    blow_up_factor: f64,
    rng: &mut R,
) -> Result<PathSample> {
    if !phi.is_nonnegative() {
        return Err(Error::invalid("phi", "initial condition must be non-negative"));
    }
    if let Some(p) = probe {
        p.psi.check_same_grid(phi)?;
    }
    let dt = stepper.dt();
    let steps = output_steps(times, dt)?;
    let last = *steps.last().unwrap_or(&0);
    let ab = params.alphabeta();
    let limit = blow_up_factor * phi.integrate();

    let mut y = phi.clone();
    let mut out_times = vec![0.0];
    let mut fields = vec![phi.clone()];
    let mut clamp_log = Vec::with_capacity(last);
    let mut martingale = Vec::new();
    let (e0, _) = probe.map(|p| p.evaluate(phi, ab)).unwrap_or((1.0, 0.0));
    if probe.is_some() {
        martingale.push(0.0);
    }
    let mut drift_integral = 0.0;
    let mut next_out = 1;
    let mut status = PathStatus::Completed;

    for k in 1..=last {
        if let Some(p) = probe {
            drift_integral += dt * p.evaluate(&y, ab).1;
        }
        clamp_log.push(stepper.step(&mut y, rng));
        let mass = y.integrate();
        if mass > limit {
            status = PathStatus::Aborted {
                time: k as f64 * dt,
                mass,
            };
            break;
        }
        if next_out < steps.len() && steps[next_out] == k {
            out_times.push(k as f64 * dt);
            fields.push(y.clone());
            if let Some(p) = probe {
                let (e, _) = p.evaluate(&y, ab);
                martingale.push(e - e0 - drift_integral);
            }
            next_out += 1;
        }
    }
    Ok(PathSample {
        params: *params,
        times: out_times,
        fields,
        clamp_log,
        martingale,
        status,
    })
}

/// Mean and standard error of `exp(-<Y_t, psi>)` over the non-aborted paths.
pub fn exp_pairing_estimator(paths: &[PathSample], psi: &Field, t: f64, seed: u64) -> Result<MCSummary> {
    let mut values = Vec::with_capacity(paths.len());
    let mut aborted = 0;
    for p in paths {
        if p.is_aborted() {
            aborted += 1;
            continue;
        }
        let f = p
            .field_at(t)
            .ok_or_else(|| Error::invalid("t", format!("{t} is not a stored output time")))?;
        values.push((-f.pairing(psi)?).exp());
    }
    Ok(MCSummary::from_values(&values, aborted, seed))
}
