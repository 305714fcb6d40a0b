//! Gaussian heat kernel and its action on grid fields.
//!
//! `P_t f` is computed as a linear (zero-padded) convolution of the cell
//! values with the kernel sampled at cell-center offsets. The sampled kernel
//! is renormalized to unit discrete mass, so mass leaves only through the
//! domain boundary.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::model::{Field, GridSpec};

/// Below this time step the semigroup acts as the identity.
pub const MIN_TIME: f64 = 1e-8;

/// `p_t(x) = (2 pi t)^{-1/2} exp(-x^2 / 2t)`.
pub fn heat_kernel(t: f64, x: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::invalid("t", "heat kernel needs t > 0"));
    }
    Ok((-x * x / (2.0 * t)).exp() / (2.0 * PI * t).sqrt())
}

/// FFT plans for linear convolution on one grid. Cheap to clone.
#[derive(Clone)]
pub struct SemigroupPlan {
    grid: GridSpec,
    padded_len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for SemigroupPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SemigroupPlan")
            .field("grid", &self.grid)
            .field("padded_len", &self.padded_len)
            .finish()
    }
}

impl SemigroupPlan {
    pub fn new(grid: GridSpec) -> Self {
        let padded_len = (2 * grid.cells).next_power_of_two();
        let mut planner = FftPlanner::new();
        SemigroupPlan {
            grid,
            padded_len,
            forward: planner.plan_fft_forward(padded_len),
            inverse: planner.plan_fft_inverse(padded_len),
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn padded_len(&self) -> usize {
        self.padded_len
    }

    /// Precomputes the transformed kernel for time `t`.
    pub fn kernel(&self, t: f64) -> HeatKernel {
        if t < MIN_TIME {
            return HeatKernel {
                plan: self.clone(),
                t,
                spectrum: None,
            };
        }
        let n = self.grid.cells;
        let dx = self.grid.dx();
        let len = self.padded_len;
        let mut buf = vec![Complex::new(0.0, 0.0); len];
        // offsets -(n-1)..=(n-1), negative ones wrapped to the end
        let weight = |k: usize| (-((k as f64) * dx).powi(2) / (2.0 * t)).exp();
        let mut total = weight(0);
        buf[0].re = total;
        for k in 1..n {
            let w = weight(k);
            if w == 0.0 {
                break;
            }
            buf[k].re = w;
            buf[len - k].re = w;
            total += 2.0 * w;
        }
        // fold the 1/len of the inverse transform into the kernel
        let scale = 1.0 / (total * len as f64);
        for c in buf.iter_mut() {
            c.re *= scale;
        }
        self.forward.process(&mut buf);
        HeatKernel {
            plan: self.clone(),
            t,
            spectrum: Some(buf.into()),
        }
    }

    pub fn apply(&self, f: &Field, t: f64) -> Field {
        self.kernel(t).apply(f)
    }
}

/// `P_t` for one fixed `t` on one grid.
#[derive(Clone, Debug)]
pub struct HeatKernel {
    plan: SemigroupPlan,
    t: f64,
    spectrum: Option<Arc<[Complex<f64>]>>,
}

impl HeatKernel {
    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn apply(&self, f: &Field) -> Field {
        let mut out = f.clone();
        self.apply_in_place(&mut out);
        out
    }

    /// Replaces `f` by `P_t f`. Nonnegative inputs give nonnegative outputs:
    /// transform round-off below zero is clipped.
    pub fn apply_in_place(&self, f: &mut Field) {
        debug_assert_eq!(f.grid(), &self.plan.grid);
        let Some(spectrum) = &self.spectrum else {
            return;
        };
        let nonneg = f.is_nonnegative();
        let len = self.plan.padded_len;
        let mut buf = vec![Complex::new(0.0, 0.0); len];
        for (b, &v) in buf.iter_mut().zip(f.values()) {
            b.re = v;
        }
        self.plan.forward.process(&mut buf);
        for (b, k) in buf.iter_mut().zip(spectrum.iter()) {
            *b *= k;
        }
        self.plan.inverse.process(&mut buf);
        for (v, b) in f.values_mut().iter_mut().zip(&buf) {
            *v = if nonneg { b.re.max(0.0) } else { b.re };
        }
    }
}

/// Convenience wrapper: `P_t f` with a freshly built plan.
pub fn apply_semigroup(f: &Field, t: f64) -> Result<Field> {
    if !(t >= 0.0) {
        return Err(Error::invalid("t", "semigroup time must be non-negative"));
    }
    Ok(SemigroupPlan::new(*f.grid()).apply(f, t))
}

/// Kernel mass outside `[left, right]` for a unit atom at `x0`; bounds the
/// boundary leakage of `P_t` applied to mass near `x0`.
pub fn tail_leakage(grid: &GridSpec, x0: f64, t: f64) -> f64 {
    let sd = t.sqrt();
    let upper = 0.5 * erfc((grid.right - x0) / (sd * std::f64::consts::SQRT_2));
    let lower = 0.5 * erfc((x0 - grid.left) / (sd * std::f64::consts::SQRT_2));
    upper + lower
}
