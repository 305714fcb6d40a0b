//! One-sided stable Lévy measure and the truncated Poisson construction of
//! the spectrally positive stable martingale measure.
//!
//! The Lévy measure is `m0(dz) = c_alpha z^{-1-alpha} dz` on `z > 0` with
//! `c_alpha = alpha (alpha - 1) / Gamma(2 - alpha)`. This normalization makes
//! the compensated sum of all jumps over a space-time box of volume `v`
//! satisfy `E exp(-lambda L) = exp(lambda^alpha v)`. Jumps below a cutoff
//! `eps` are dropped, not approximated.

use rand::Rng;
use rand_distr::{Distribution, Exp1, Poisson};

use crate::error::{Error, Result};
use crate::special::{exp_defect, gamma, integrate_adaptive};

/// Poisson means below this are sampled by inversion.
const POISSON_INVERSION_MAX: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevyMeasure {
    alpha: f64,
    c_alpha: f64,
}

impl LevyMeasure {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 1.0 && alpha < 2.0) {
            return Err(Error::invalid("alpha", "must lie in (1, 2)"));
        }
        Ok(LevyMeasure {
            alpha,
            c_alpha: alpha * (alpha - 1.0) / gamma(2.0 - alpha),
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn c_alpha(&self) -> f64 {
        self.c_alpha
    }

    pub fn density(&self, z: f64) -> f64 {
        if z > 0.0 {
            self.c_alpha * z.powf(-1.0 - self.alpha)
        } else {
            0.0
        }
    }

    /// `m0([eps, inf)) = (alpha - 1) / Gamma(2 - alpha) * eps^{-alpha}`.
    pub fn tail_mass(&self, eps: f64) -> f64 {
        self.c_alpha / self.alpha * eps.powf(-self.alpha)
    }

    /// `int_eps^inf z m0(dz) = alpha / Gamma(2 - alpha) * eps^{1 - alpha}`.
    pub fn first_moment_tail(&self, eps: f64) -> f64 {
        self.c_alpha / (self.alpha - 1.0) * eps.powf(1.0 - self.alpha)
    }

    /// `int_0^eps z^2 m0(dz)`: variance per unit volume of the dropped jumps.
    pub fn small_jump_variance(&self, eps: f64) -> f64 {
        self.c_alpha * eps.powf(2.0 - self.alpha) / (2.0 - self.alpha)
    }

    /// `int_0^eps (e^{-lambda z} - 1 + lambda z) m0(dz)`, the part of the
    /// Laplace exponent carried by the dropped jumps.
    pub fn small_jump_laplace_defect(&self, lambda: f64, eps: f64) -> f64 {
        if lambda == 0.0 {
            return 0.0;
        }
        let x = lambda * eps;
        if x > 2.0 {
            let c = self.c_alpha;
            let a = self.alpha;
            return integrate_adaptive(
                |z| exp_defect(lambda * z) * c * z.powf(-1.0 - a),
                0.0,
                eps,
                1e-14,
            );
        }
        // c eps^{-alpha} sum_{k>=2} (-x)^k / (k! (k - alpha))
        let mut term_pow = 1.0; // (-x)^k / k!
        let mut sum = 0.0;
        for k in 1..60 {
            term_pow *= -x / k as f64;
            if k < 2 {
                continue;
            }
            let term = term_pow / (k as f64 - self.alpha);
            sum += term;
            if term.abs() < 1e-18 * sum.abs() {
                break;
            }
        }
        self.c_alpha * eps.powf(-self.alpha) * sum
    }

    /// Laplace exponent of the compensated jumps above `eps`:
    /// `log E exp(-lambda L) / volume`.
    pub fn truncated_laplace_exponent(&self, lambda: f64, eps: f64) -> f64 {
        lambda.powf(self.alpha) - self.small_jump_laplace_defect(lambda, eps)
    }

    /// Sum of `count` independent jump sizes drawn from `m0` restricted to
    /// `[eps, inf)`. Uses `eps * exp(E / alpha)` with `E ~ Exp(1)`, which has
    /// the same law as the inverse-CDF draw `eps * u^{-1/alpha}`.
    pub fn sum_of_jumps<R: Rng + ?Sized>(&self, count: u64, eps: f64, rng: &mut R) -> f64 {
        let inv_alpha = 1.0 / self.alpha;
        let mut acc = [0.0f64; 4];
        let mut i = 0u64;
        while i + 4 <= count {
            for a in acc.iter_mut() {
                let e: f64 = Exp1.sample(rng);
                *a += (e * inv_alpha).exp();
            }
            i += 4;
        }
        while i < count {
            let e: f64 = Exp1.sample(rng);
            acc[0] += (e * inv_alpha).exp();
            i += 1;
        }
        eps * ((acc[0] + acc[1]) + (acc[2] + acc[3]))
    }

    /// Single jump size above `eps` from the inverse tail.
    pub fn sample_jump<R: Rng + ?Sized>(&self, eps: f64, rng: &mut R) -> f64 {
        let u: f64 = open_unit(rng);
        eps * u.powf(-1.0 / self.alpha)
    }

    /// The noise mass `L(B)` of a space-time box `B` of Lebesgue measure
    /// `volume`: a Poisson number of jumps above `eps`, summed, minus the
    /// compensator `volume * int_eps^inf z m0(dz)`.
    pub fn sample_noise_increment<R: Rng + ?Sized>(&self, volume: f64, eps: f64, rng: &mut R) -> f64 {
        let count = sample_poisson(volume * self.tail_mass(eps), rng);
        self.sum_of_jumps(count, eps, rng) - volume * self.first_moment_tail(eps)
    }
}

/// Inverse tail of `m0` above `eps`: `eps * u^{-1/alpha}`.
pub fn sample_pareto_jump_size(alpha: f64, eps: f64, u: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::invalid("u", "must lie strictly inside (0, 1)"));
    }
    if !(eps > 0.0) {
        return Err(Error::invalid("eps", "must be positive"));
    }
    Ok(eps * u.powf(-1.0 / alpha))
}

/// `E exp(-lambda L_t(A)) = exp(lambda^alpha t |A|)`.
pub fn laplace_functional_target(alpha: f64, lambda: f64, t: f64, area: f64) -> f64 {
    (lambda.powf(alpha) * t * area).exp()
}

/// Uniform draw on the open interval (0, 1).
pub fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

/// Poisson variate: inversion for small means, `rand_distr` otherwise.
pub fn sample_poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if !(mean > 0.0) {
        return 0;
    }
    if mean < POISSON_INVERSION_MAX {
        let u: f64 = rng.random();
        let mut p = (-mean).exp();
        let mut cdf = p;
        let mut k = 0u64;
        while u > cdf {
            k += 1;
            p *= mean / k as f64;
            cdf += p;
            if p == 0.0 {
                break;
            }
        }
        k
    } else {
        Poisson::new(mean).map(|d| d.sample(rng) as u64).unwrap_or(0)
    }
}

/// One atom of a Poisson random measure on time x size x space x mark.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpEvent {
    pub time: f64,
    pub size: f64,
    pub location: f64,
    pub mark: f64,
}

/// Space-time-mark box on which a truncated PRM is sampled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrmWindow {
    pub time: (f64, f64),
    pub space: (f64, f64),
    pub mark_height: f64,
}

impl PrmWindow {
    pub fn volume(&self) -> f64 {
        (self.time.1 - self.time.0) * (self.space.1 - self.space.0) * self.mark_height
    }
}

/// Atoms of the PRM with intensity `ds m0(dz) dy dv` restricted to sizes
/// `z >= eps` and to `window`, in no particular order.
pub fn sample_truncated_prm<R: Rng + ?Sized>(
    measure: &LevyMeasure,
    window: &PrmWindow,
    eps: f64,
    rng: &mut R,
) -> Vec<JumpEvent> {
    let count = sample_poisson(window.volume() * measure.tail_mass(eps), rng);
    (0..count)
        .map(|_| {
            let time = window.time.0 + (window.time.1 - window.time.0) * rng.random::<f64>();
            let location = window.space.0 + (window.space.1 - window.space.0) * rng.random::<f64>();
            let mark = window.mark_height * rng.random::<f64>();
            JumpEvent {
                time,
                size: measure.sample_jump(eps, rng),
                location,
                mark,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::RngStream;
    use crate::special::{ks_p_value, ks_statistic};
    use approx::assert_relative_eq;

    fn m() -> LevyMeasure {
        LevyMeasure::new(1.5).unwrap()
    }

    /// Independent oracle: integrate the density over [a, b] with a
    /// log-spaced composite Simpson rule.
    fn simpson_log(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let (la, lb) = (a.ln(), b.ln());
        let h = (lb - la) / n as f64;
        let g = |s: f64| {
            let z = s.exp();
            f(z) * z
        };
        let mut s = g(la) + g(lb);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * g(la + i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn rejects_alpha_outside_range() {
        assert!(LevyMeasure::new(1.0).is_err());
        assert!(LevyMeasure::new(2.0).is_err());
    }

    #[test]
    fn tail_mass_against_quadrature() {
        let m = m();
        // oracle on [1, 1e6] plus the analytic remainder beyond 1e6 (< 1e-9)
        let oracle = simpson_log(|z| m.density(z), 1.0, 1e6, 20_000);
        assert_relative_eq!(m.tail_mass(1.0), 0.282_094_791_773_878_1, max_relative = 1e-12);
        assert!((m.tail_mass(1.0) - oracle).abs() < 1e-8);
        assert_relative_eq!(m.tail_mass(0.3) / m.tail_mass(0.6), 2f64.powf(1.5), max_relative = 1e-13);
        assert!(m.tail_mass(1e12) < 1e-17);
    }

    #[test]
    fn first_moment_tail_against_quadrature() {
        let m = m();
        assert_relative_eq!(m.first_moment_tail(1.0), 0.846_284_375_321_634_4, max_relative = 1e-12);
        let oracle = simpson_log(|z| z * m.density(z), 1.0, 1e8, 40_000);
        let remainder = m.c_alpha() / 0.5 * 1e8f64.powf(-0.5);
        assert!((m.first_moment_tail(1.0) - oracle - remainder).abs() < 1e-7);
        assert_relative_eq!(m.first_moment_tail(4.0), m.first_moment_tail(1.0) / 2.0, max_relative = 1e-14);
        let mut prev = 0.0;
        for eps in [1.0, 0.1, 1e-2, 1e-4, 1e-8] {
            let v = m.first_moment_tail(eps);
            assert!(v > prev && v.is_finite());
            prev = v;
        }
    }

    #[test]
    fn small_jump_variance_closed_form() {
        let m = m();
        let eps = 1e-3;
        let oracle = simpson_log(|z| z * z * m.density(z), 1e-40, eps, 40_000);
        assert!((m.small_jump_variance(eps) - oracle).abs() < 1e-9);
        assert_relative_eq!(
            m.small_jump_variance(eps) / m.small_jump_variance(eps / 2.0),
            2f64.powf(0.5),
            max_relative = 1e-13
        );
    }

    #[test]
    fn laplace_defect_series_matches_quadrature() {
        let m = m();
        for (lambda, eps) in [(1.0, 1e-4), (0.5, 1e-2), (3.0, 0.5), (10.0, 0.25)] {
            let series = m.small_jump_laplace_defect(lambda, eps);
            let quad = simpson_log(|z| exp_defect(lambda * z) * m.density(z), 1e-40, eps, 60_000);
            assert_relative_eq!(series, quad, max_relative = 1e-6);
            assert!(series <= 0.5 * lambda * lambda * m.small_jump_variance(eps));
        }
    }

    #[test]
    fn pareto_inverse_values() {
        assert_relative_eq!(
            sample_pareto_jump_size(1.5, 0.01, 0.5).unwrap(),
            0.015_874_010_519_681_995,
            max_relative = 1e-14
        );
        let near_one = sample_pareto_jump_size(1.5, 0.01, 1.0 - 1e-12).unwrap();
        assert!((near_one - 0.01).abs() < 1e-12);
        assert!(sample_pareto_jump_size(1.5, 0.01, 0.0).is_err());
        assert!(sample_pareto_jump_size(1.5, 0.01, 1.0).is_err());
    }

    #[test]
    fn pareto_sampler_ks_and_median() {
        let m = m();
        let eps = 0.01;
        let mut rng = RngStream::new(11, 0).rng();
        let mut draws: Vec<f64> = (0..100_000).map(|_| m.sample_jump(eps, &mut rng)).collect();
        let d = ks_statistic(&mut draws, |z| 1.0 - (z / eps).powf(-1.5));
        assert!(ks_p_value(d, draws.len()) > 0.01);
        // sorted by ks_statistic; median vs eps 2^{1/alpha}, SE from the
        // asymptotic variance 1 / (4 n f(med)^2)
        let med = 0.5 * (draws[49_999] + draws[50_000]);
        let want = eps * 2f64.powf(1.0 / 1.5);
        let dens = 1.5 / eps * (want / eps).powf(-2.5);
        let se = 1.0 / (2.0 * dens * 100_000f64.sqrt());
        assert!((med - want).abs() < 3.0 * se, "{med} vs {want} se {se}");
    }

    #[test]
    fn bulk_jump_sum_has_pareto_law() {
        // sum_of_jumps(1, ..) must agree in law with the inverse-CDF draw
        let m = m();
        let eps = 0.5;
        let mut rng = RngStream::new(12, 0).rng();
        let mut draws: Vec<f64> = (0..50_000).map(|_| m.sum_of_jumps(1, eps, &mut rng)).collect();
        let d = ks_statistic(&mut draws, |z| 1.0 - (z / eps).powf(-1.5));
        assert!(ks_p_value(d, draws.len()) > 0.01);
    }

    #[test]
    fn noise_increment_vanishes_with_volume() {
        let m = m();
        let mut rng = RngStream::new(13, 0).rng();
        for _ in 0..100 {
            assert!(m.sample_noise_increment(1e-300, 1e-3, &mut rng).abs() < 1e-290);
        }
    }

    #[test]
    fn noise_increment_is_centered_and_matches_laplace_target() {
        let m = m();
        let eps = 1e-2;
        let n = 100_000;
        let mut rng = RngStream::new(14, 0).rng();
        let xs: Vec<f64> = (0..n).map(|_| m.sample_noise_increment(1.0, eps, &mut rng)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() < 3.0 * (var / n as f64).sqrt(), "mean {mean}");

        let vals: Vec<f64> = xs.iter().map(|x| (-x).exp()).collect();
        let mean = vals.iter().sum::<f64>() / n as f64;
        let var = vals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let target = laplace_functional_target(1.5, 1.0, 1.0, 1.0);
        let bias = target * (1.0 - (-m.small_jump_laplace_defect(1.0, eps)).exp());
        assert!((mean - target).abs() <= 3.0 * (var / n as f64).sqrt() + bias, "{mean} vs {target}");
    }

    #[test]
    fn laplace_target_values() {
        assert_eq!(laplace_functional_target(1.5, 0.0, 1.0, 1.0), 1.0);
        assert_relative_eq!(laplace_functional_target(1.5, 1.0, 1.0, 1.0), std::f64::consts::E);
        assert_relative_eq!(
            laplace_functional_target(1.5, 0.5, 2.0, 1.0),
            2.028_114_981_647_472_5,
            max_relative = 1e-14
        );
    }

    #[test]
    fn poisson_sampler_moments() {
        let mut rng = RngStream::new(15, 0).rng();
        for mean in [0.3, 4.0, 9.9, 50.0] {
            let n = 200_000;
            let s: u64 = (0..n).map(|_| sample_poisson(mean, &mut rng)).sum();
            let emp = s as f64 / n as f64;
            assert!((emp - mean).abs() < 4.0 * (mean / n as f64).sqrt(), "{mean}: {emp}");
        }
        assert_eq!(sample_poisson(0.0, &mut rng), 0);
    }

    /// Compensated sums under the two equivalent constructions: sizes `c z`
    /// at intensity `rate`, versus sizes `z` at intensity `c^alpha rate`.
    #[test]
    fn scaling_and_thinning_constructions_agree_in_law() {
        let m = m();
        let (c, rate, eps) = (2.0f64, 0.7, 0.05);
        let n = 40_000;
        let mut rng_a = RngStream::new(16, 0).rng();
        let mut rng_b = RngStream::new(16, 1).rng();
        let scaled: Vec<f64> = (0..n)
            .map(|_| {
                let k = sample_poisson(rate * m.tail_mass(eps), &mut rng_a);
                c * m.sum_of_jumps(k, eps, &mut rng_a) - c * rate * m.first_moment_tail(eps)
            })
            .collect();
        let thinned: Vec<f64> = (0..n)
            .map(|_| {
                let r = c.powf(1.5) * rate;
                let k = sample_poisson(r * m.tail_mass(c * eps), &mut rng_b);
                m.sum_of_jumps(k, c * eps, &mut rng_b) - r * m.first_moment_tail(c * eps)
            })
            .collect();
        for lambda in [0.1, 0.25, 0.5, 0.75, 1.0] {
            let stats = |xs: &[f64]| {
                let v: Vec<f64> = xs.iter().map(|x| (-lambda * x).exp()).collect();
                let mean = v.iter().sum::<f64>() / n as f64;
                let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
                (mean, var / n as f64)
            };
            let (ma, va) = stats(&scaled);
            let (mb, vb) = stats(&thinned);
            assert!((ma - mb).abs() <= 3.0 * (va + vb).sqrt(), "lambda {lambda}: {ma} vs {mb}");
        }
    }

    #[test]
    fn halving_eps_shrinks_dropped_variance() {
        // Couple the two cutoffs on one PRM realization: the eps/2 increment
        // minus the eps increment is the compensated band [eps/2, eps), whose
        // variance is the drop in the small-jump variance.
        let m = m();
        let eps = 0.02;
        let n = 20_000;
        let window = PrmWindow {
            time: (0.0, 1.0),
            space: (0.0, 1.0),
            mark_height: 1.0,
        };
        let comp = m.first_moment_tail(eps / 2.0) - m.first_moment_tail(eps);
        let mut rng = RngStream::new(17, 0).rng();
        let diffs: Vec<f64> = (0..n)
            .map(|_| {
                let atoms = sample_truncated_prm(&m, &window, eps / 2.0, &mut rng);
                atoms.iter().filter(|a| a.size < eps).map(|a| a.size).sum::<f64>() - comp
            })
            .collect();
        let sq: Vec<f64> = diffs.iter().map(|d| d * d).collect();
        let var = sq.iter().sum::<f64>() / n as f64;
        let var_se = (sq.iter().map(|s| (s - var).powi(2)).sum::<f64>() / (n * (n - 1)) as f64).sqrt();
        let band = m.small_jump_variance(eps) - m.small_jump_variance(eps / 2.0);
        assert!((var - band).abs() <= 3.0 * var_se, "{var} vs {band} (se {var_se})");
        assert_relative_eq!(
            m.small_jump_variance(eps / 2.0),
            m.small_jump_variance(eps) / 2f64.powf(0.5),
            max_relative = 1e-13
        );
    }

    #[test]
    fn prm_window_atoms_respect_bounds_and_cutoff() {
        let m = m();
        let w = PrmWindow {
            time: (0.0, 0.5),
            space: (-1.0, 1.0),
            mark_height: 2.0,
        };
        let mut rng = RngStream::new(18, 0).rng();
        let atoms = sample_truncated_prm(&m, &w, 0.05, &mut rng);
        let expect = w.volume() * m.tail_mass(0.05);
        assert!((atoms.len() as f64 - expect).abs() < 5.0 * expect.sqrt());
        for a in atoms {
            assert!(a.size >= 0.05);
            assert!((0.0..0.5).contains(&a.time));
            assert!((-1.0..1.0).contains(&a.location));
            assert!((0.0..2.0).contains(&a.mark));
        }
    }
}
