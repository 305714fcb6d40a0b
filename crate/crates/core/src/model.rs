//! Grid, field and parameter types shared by every simulator.
//!
//! A [`Field`] stores a density on the cells of a uniform [`GridSpec`]. All
//! integrals use the midpoint rule on cell centers, so a Dirac atom of mass
//! `m` at `u` is represented by adding `m / dx` to the cell containing `u`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::gamma;

/// Uniform partition of `[left, right]` into `cells` cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub left: f64,
    pub right: f64,
    pub cells: usize,
}

impl GridSpec {
    pub const MIN_CELLS: usize = 8;

    pub fn new(left: f64, right: f64, cells: usize) -> Result<Self> {
        let grid = GridSpec { left, right, cells };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.left.is_finite() && self.right.is_finite()) || self.right <= self.left {
            return Err(Error::invalid("grid", "need finite left < right"));
        }
        if self.cells < Self::MIN_CELLS {
            return Err(Error::invalid(
                "grid.cells",
                format!("need at least {} cells", Self::MIN_CELLS),
            ));
        }
        Ok(())
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        (self.right - self.left) / self.cells as f64
    }

    #[inline]
    pub fn center(&self, i: usize) -> f64 {
        self.left + (i as f64 + 0.5) * self.dx()
    }

    pub fn centers(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.cells).map(move |i| self.center(i))
    }

    /// Index of the cell containing `x`, or `None` outside the domain.
    pub fn cell_of(&self, x: f64) -> Option<usize> {
        if !(x >= self.left && x < self.right) {
            return None;
        }
        let i = ((x - self.left) / self.dx()) as usize;
        Some(i.min(self.cells - 1))
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            left: -10.0,
            right: 10.0,
            cells: 400,
        }
    }
}

/// Cell-wise density on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: GridSpec,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: GridSpec) -> Self {
        Field {
            grid,
            values: vec![0.0; grid.cells],
        }
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(f64) -> f64) -> Self {
        Field {
            grid,
            values: grid.centers().map(f).collect(),
        }
    }

    pub fn from_values(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.cells {
            return Err(Error::invalid(
                "values",
                format!("expected {} cells, got {}", grid.cells, values.len()),
            ));
        }
        Ok(Field { grid, values })
    }

    /// Field equal to `mass / dx` on the cell containing `x`, zero elsewhere.
    pub fn point_mass(grid: GridSpec, x: f64, mass: f64) -> Self {
        let mut f = Field::zeros(grid);
        f.deposit(x, mass);
        f
    }

    #[inline]
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// `sum_i f(x_i) dx`.
    pub fn integrate(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.dx()
    }

    /// `||f||_p^p = sum_i |f(x_i)|^p dx`.
    pub fn lp_norm_pow(&self, p: f64) -> f64 {
        debug_assert!(p >= 1.0);
        let s: f64 = if p == 1.0 {
            self.values.iter().map(|v| v.abs()).sum()
        } else {
            self.values.iter().map(|v| v.abs().powf(p)).sum()
        };
        s * self.grid.dx()
    }

    /// `<f, g> = sum_i f(x_i) g(x_i) dx`.
    pub fn pairing(&self, other: &Field) -> Result<f64> {
        self.check_same_grid(other)?;
        let s: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum();
        Ok(s * self.grid.dx())
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sup_distance(&self, other: &Field) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    pub fn is_nonnegative(&self) -> bool {
        self.values.iter().all(|&v| v >= 0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Adds an atom of mass `mass` at `x`. Returns `false` if `x` lies outside
    /// the grid, in which case the mass is lost.
    pub fn deposit(&mut self, x: f64, mass: f64) -> bool {
        match self.grid.cell_of(x) {
            Some(i) => {
                self.values[i] += mass / self.grid.dx();
                true
            }
            None => false,
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &Field, scale: f64) -> Result<()> {
        self.check_same_grid(other)?;
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += scale * b;
        }
        Ok(())
    }

    pub fn check_same_grid(&self, other: &Field) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch {
                left: self.grid,
                right: other.grid,
            });
        }
        Ok(())
    }
}

/// Model parameters together with the constants derived from them.
///
/// `sink_factor` scales `b_n` to give the coefficient of the nonlinear sink in
/// the dual PDE, and `time_change_factor` multiplies `||Z||_alpha^alpha` in the
/// internal clock of the dual process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelParams {
    pub alpha: f64,
    pub beta: f64,
    pub n: u64,
    pub eps_jump: f64,
    pub dt: f64,
    pub horizon: f64,
    pub grid: GridSpec,
    pub sink_factor: f64,
    pub time_change_factor: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            alpha: 1.5,
            beta: 0.8,
            n: 16,
            eps_jump: 1e-3,
            dt: 1e-3,
            horizon: 0.5,
            grid: GridSpec::default(),
            sink_factor: 0.5,
            time_change_factor: 0.5,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let p = self;
        if !(p.alpha > 1.0 && p.alpha < 2.0) {
            return Err(Error::invalid("alpha", "must lie in (1, 2)"));
        }
        if !(p.beta > 0.0 && p.beta < 1.0) {
            return Err(Error::invalid("beta", "must lie in (0, 1)"));
        }
        if p.alpha * p.beta <= 1.0 {
            return Err(Error::invalid(
                "beta",
                format!(
                    "alpha*beta = {} must exceed 1 (need 1/alpha < beta)",
                    p.alpha * p.beta
                ),
            ));
        }
        if p.n == 0 {
            return Err(Error::invalid("n", "must be positive"));
        }
        if !(p.eps_jump > 0.0 && p.eps_jump.is_finite()) {
            return Err(Error::invalid("eps_jump", "must be positive"));
        }
        if !(p.horizon > 0.0 && p.horizon.is_finite()) {
            return Err(Error::invalid("horizon", "must be positive"));
        }
        p.grid.validate()?;
        let dx = p.grid.dx();
        if !(p.dt > 0.0 && p.dt < dx * dx) {
            return Err(Error::invalid(
                "dt",
                format!("must lie in (0, dx^2) = (0, {})", dx * dx),
            ));
        }
        if !(p.sink_factor >= 0.0 && p.sink_factor.is_finite()) {
            return Err(Error::invalid("sink_factor", "must be non-negative"));
        }
        if !(p.time_change_factor > 0.0 && p.time_change_factor.is_finite()) {
            return Err(Error::invalid("time_change_factor", "must be positive"));
        }
        Ok(())
    }

    #[inline]
    pub fn alphabeta(&self) -> f64 {
        self.alpha * self.beta
    }

    /// `b_n = ab / Gamma(2 - ab) * n^(ab - 1)` with `ab = alpha * beta`.
    pub fn b_n(&self) -> f64 {
        let ab = self.alphabeta();
        ab / gamma(2.0 - ab) * (self.n as f64).powf(ab - 1.0)
    }

    /// `eta = ab (ab - 1) / Gamma(2 - ab)`.
    pub fn eta(&self) -> f64 {
        let ab = self.alphabeta();
        ab * (ab - 1.0) / gamma(2.0 - ab)
    }

    /// Rate of the exponential internal clocks: `n^ab (ab - 1) / Gamma(2 - ab)`.
    pub fn clock_rate(&self) -> f64 {
        let ab = self.alphabeta();
        (self.n as f64).powf(ab) * (ab - 1.0) / gamma(2.0 - ab)
    }

    /// Coefficient `c` of the sink term `-c v^alpha` in the dual PDE.
    pub fn sink_coefficient(&self) -> f64 {
        self.sink_factor * self.b_n()
    }

    /// Internal-time level at which the dual process is stopped, `ln n`.
    pub fn k_n(&self) -> f64 {
        (self.n as f64).ln()
    }
}

/// Identifies one independent random stream: a ChaCha8 key derived from
/// `seed` together with the cipher's 64-bit stream selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        RngStream { seed, stream }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn unit_grid(cells: usize) -> GridSpec {
        GridSpec::new(0.0, 1.0, cells).unwrap()
    }

    #[test]
    fn grid_rejects_degenerate_specs() {
        assert!(GridSpec::new(1.0, 1.0, 10).is_err());
        assert!(GridSpec::new(0.0, 1.0, 4).is_err());
        assert!(GridSpec::new(0.0, f64::INFINITY, 10).is_err());
    }

    #[test]
    fn cell_lookup() {
        let g = unit_grid(10);
        assert_eq!(g.cell_of(0.0), Some(0));
        assert_eq!(g.cell_of(0.15), Some(1));
        assert_eq!(g.cell_of(0.999), Some(9));
        assert_eq!(g.cell_of(1.0), None);
        assert_eq!(g.cell_of(-0.01), None);
        assert_eq!(g.cell_of(f64::NAN), None);
    }

    #[test]
    fn integrate_zero_and_indicator() {
        let g = GridSpec::new(-1.0, 2.0, 30).unwrap();
        assert_eq!(Field::zeros(g).integrate(), 0.0);
        let ind = Field::from_fn(g, |x| if (0.0..1.0).contains(&x) { 1.0 } else { 0.0 });
        assert_relative_eq!(ind.integrate(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn lp_norm_pow_constant() {
        let f = Field::from_fn(unit_grid(16), |_| 2.0);
        assert_relative_eq!(f.lp_norm_pow(1.5), 2f64.powf(1.5), epsilon = 1e-12);
        assert_relative_eq!(f.lp_norm_pow(1.0), f.integrate(), epsilon = 1e-15);
    }

    #[test]
    fn pairing_checks_grid() {
        let a = Field::zeros(unit_grid(10));
        let b = Field::zeros(unit_grid(12));
        assert!(matches!(a.pairing(&b), Err(Error::GridMismatch { .. })));
    }

    #[test]
    fn pairing_of_indicators() {
        let g = GridSpec::new(-1.0, 2.0, 30).unwrap();
        let ind = Field::from_fn(g, |x| if (0.0..1.0).contains(&x) { 1.0 } else { 0.0 });
        assert_eq!(ind.pairing(&Field::zeros(g)).unwrap(), 0.0);
        assert_relative_eq!(ind.pairing(&ind).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn deposit_is_mass_preserving() {
        let g = unit_grid(20);
        let mut f = Field::zeros(g);
        assert!(f.deposit(0.33, 0.7));
        assert!(!f.deposit(1.5, 0.7));
        assert_relative_eq!(f.integrate(), 0.7, epsilon = 1e-14);
        assert_relative_eq!(f.values()[6], 0.7 / g.dx(), epsilon = 1e-12);
    }

    #[test]
    fn default_params_are_valid_and_derived_constants_positive() {
        let p = ModelParams::default();
        p.validate().unwrap();
        assert!(p.b_n() > 0.0 && p.eta() > 0.0 && p.clock_rate() > 0.0);
        assert_relative_eq!(p.k_n(), 16f64.ln());
    }

    #[test]
    fn params_outside_regime_rejected() {
        let p = ModelParams {
            alpha: 1.2,
            beta: 0.7,
            ..Default::default()
        };
        let err = p.validate().unwrap_err().to_string();
        assert!(err.contains("beta"), "{err}");
        let p = ModelParams {
            dt: 0.01,
            ..Default::default()
        };
        assert!(p.validate().is_err());
    }

    #[test]
    fn derived_constants_match_closed_forms() {
        // Gamma(0.8) = 1.1642297137253033
        let g08 = 1.164_229_713_725_303_3;
        let p = ModelParams {
            n: 10,
            ..Default::default()
        };
        assert_relative_eq!(p.b_n(), 1.2 / g08 * 10f64.powf(0.2), max_relative = 1e-12);
        assert_relative_eq!(p.eta(), 1.2 * 0.2 / g08, max_relative = 1e-12);
        assert_relative_eq!(p.clock_rate(), 10f64.powf(1.2) * 0.2 / g08, max_relative = 1e-12);
        // eta * Gamma(-ab) = 1: eta is the normalizer of the dual Levy measure.
        assert_relative_eq!(p.eta() * gamma(-1.2), 1.0, max_relative = 1e-10);
    }

    #[test]
    fn rng_stream_is_reproducible_and_streams_differ() {
        let a: Vec<u64> = (0..8).map({
            let mut r = RngStream::new(7, 3).rng();
            move |_| r.random()
        }).collect();
        let b: Vec<u64> = (0..8).map({
            let mut r = RngStream::new(7, 3).rng();
            move |_| r.random()
        }).collect();
        let c: Vec<u64> = (0..8).map({
            let mut r = RngStream::new(7, 4).rng();
            move |_| r.random()
        }).collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    fn field_strategy(cells: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-5.0f64..5.0, cells)
    }

    proptest! {
        #[test]
        fn integrate_and_pairing_are_linear(
            a in field_strategy(16), b in field_strategy(16), c in field_strategy(16),
            s in -3.0f64..3.0,
        ) {
            let g = unit_grid(16);
            let fa = Field::from_values(g, a).unwrap();
            let fb = Field::from_values(g, b).unwrap();
            let fc = Field::from_values(g, c).unwrap();
            let mut comb = fa.clone();
            comb.add_scaled(&fb, s).unwrap();
            let lhs = comb.integrate();
            let rhs = fa.integrate() + s * fb.integrate();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
            let lhs = comb.pairing(&fc).unwrap();
            let rhs = fa.pairing(&fc).unwrap() + s * fb.pairing(&fc).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
            prop_assert_eq!(fa.pairing(&fc).unwrap(), fc.pairing(&fa).unwrap());
        }

        #[test]
        fn lp_norm_triangle_inequality(
            a in field_strategy(16), b in field_strategy(16), p in 1.0f64..3.0,
        ) {
            let g = unit_grid(16);
            let fa = Field::from_values(g, a).unwrap();
            let fb = Field::from_values(g, b).unwrap();
            let mut sum = fa.clone();
            sum.add_scaled(&fb, 1.0).unwrap();
            let norm = |f: &Field| f.lp_norm_pow(p).powf(1.0 / p);
            prop_assert!(norm(&sum) <= norm(&fa) + norm(&fb) + 1e-12);
        }
    }
}
