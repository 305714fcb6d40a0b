//! Analytic test functions. Gaussian bumps have closed-form Laplacians, which
//! the martingale residual needs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heat::heat_kernel;
use crate::model::{Field, GridSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Shape {
    /// `mass * p_{width^2}(x - center)`.
    Gaussian { center: f64, width: f64, mass: f64 },
    Zero,
}

impl Default for Shape {
    fn default() -> Self {
        Shape::unit_gaussian()
    }
}

impl Shape {
    pub fn unit_gaussian() -> Self {
        Shape::Gaussian {
            center: 0.0,
            width: 1.0,
            mass: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Shape::Gaussian { center, width, mass } => {
                if !center.is_finite() {
                    return Err(Error::invalid("center", "must be finite"));
                }
                if !(width > 0.0 && width.is_finite()) {
                    return Err(Error::invalid("width", "must be positive"));
                }
                if !(mass >= 0.0 && mass.is_finite()) {
                    return Err(Error::invalid("mass", "must be finite and non-negative"));
                }
                Ok(())
            }
            Shape::Zero => Ok(()),
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        match *self {
            Shape::Gaussian { center, width, mass } => {
                mass * heat_kernel(width * width, x - center).unwrap_or(0.0)
            }
            Shape::Zero => 0.0,
        }
    }

    /// Second derivative in `x`.
    pub fn second_derivative(&self, x: f64) -> f64 {
        match *self {
            Shape::Gaussian { center, width, .. } => {
                let w2 = width * width;
                let u = (x - center) / w2;
                self.value(x) * (u * u - 1.0 / w2)
            }
            Shape::Zero => 0.0,
        }
    }

    pub fn sample(&self, grid: GridSpec) -> Field {
        Field::from_fn(grid, |x| self.value(x))
    }

    pub fn half_laplacian(&self, grid: GridSpec) -> Field {
        Field::from_fn(grid, |x| 0.5 * self.second_derivative(x))
    }

    /// Mass of the shape outside the grid.
    pub fn tail_mass(&self, grid: &GridSpec) -> f64 {
        match *self {
            Shape::Gaussian { center, width, mass } => {
                mass * crate::heat::tail_leakage(grid, center, width * width)
            }
            Shape::Zero => 0.0,
        }
    }
}
