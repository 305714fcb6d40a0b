//! Laplace-transform check of the truncated noise on one space-time box.

use serde::{Deserialize, Serialize};

use super::{fmt_f64, Assertion, Executor, Table};
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::noise::{laplace_functional_target, LevyMeasure};
use crate::stats::mean_and_se;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseRow {
    pub lambda: f64,
    pub empirical: f64,
    pub target: f64,
    pub se: f64,
    /// Upper bound on `|E_eps - target|` caused by dropping jumps below `eps`.
    pub bias_bound: f64,
    /// Same bound at `eps / 2`; the ratio to `bias_bound` is about `2^{alpha-2}`.
    pub bias_bound_half_eps: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseReport {
    pub seed: u64,
    pub replicas: u64,
    pub eps: f64,
    pub volume: f64,
    /// Variance of the dropped small jumps over the box.
    pub dropped_variance: f64,
    pub rows: Vec<NoiseRow>,
    pub assertions: Vec<Assertion>,
}

impl NoiseReport {
    pub fn table(&self) -> Table {
        Table {
            columns: vec!["lambda", "empirical", "target", "se", "bias_bound", "pass"],
            rows: self
                .rows
                .iter()
                .map(|r| {
                    vec![
                        fmt_f64(r.lambda),
                        fmt_f64(r.empirical),
                        fmt_f64(r.target),
                        fmt_f64(r.se),
                        fmt_f64(r.bias_bound),
                        r.pass.to_string(),
                    ]
                })
                .collect(),
        }
    }
}

/// `target * (1 - exp(-volume * lambda^2 sigma^2(eps) / 2))`.
///
/// The truncated transform is `target * exp(-volume * D)` with
/// `D = int_0^eps (e^{-lambda z} - 1 + lambda z) m0(dz) <= lambda^2 sigma^2 / 2`.
pub fn small_jump_bias_bound(measure: &LevyMeasure, lambda: f64, eps: f64, volume: f64, target: f64) -> f64 {
    let d = 0.5 * lambda * lambda * measure.small_jump_variance(eps);
    -target * (-volume * d).exp_m1()
}

pub fn run_noise_check(config: &ExperimentConfig, exec: &Executor) -> Result<NoiseReport> {
    let alpha = config.model.alpha;
    let eps = config.model.eps_jump;
    let settings = &config.noise;
    let volume = settings.t * settings.area;
    let measure = LevyMeasure::new(alpha)?;
    let seed = config.seed;

    let samples = exec.map_replicas(config.replicas, |r| {
        let mut rng = super::y_stream(seed, r).rng();
        measure.sample_noise_increment(volume, eps, &mut rng)
    });

    let mut rows = Vec::with_capacity(settings.lambdas.len());
    let mut assertions = Vec::new();
    for &lambda in &settings.lambdas {
        let values: Vec<f64> = samples.iter().map(|l| (-lambda * l).exp()).collect();
        let (empirical, se) = mean_and_se(&values);
        let target = laplace_functional_target(alpha, lambda, settings.t, settings.area);
        let bias_bound = small_jump_bias_bound(&measure, lambda, eps, volume, target);
        let pass = super::within_ci(empirical, target, se, bias_bound);
        assertions.push(Assertion::new(
            format!("laplace transform at lambda={lambda}"),
            pass,
            format!("empirical {empirical:.6} vs target {target:.6}, 3se {:.2e}, bias bound {bias_bound:.2e}", 3.0 * se),
        ));
        rows.push(NoiseRow {
            lambda,
            empirical,
            target,
            se,
            bias_bound,
            bias_bound_half_eps: small_jump_bias_bound(&measure, lambda, eps / 2.0, volume, target),
            pass,
        });
    }
    Ok(NoiseReport {
        seed,
        replicas: config.replicas,
        eps,
        volume,
        dropped_variance: volume * measure.small_jump_variance(eps),
        rows,
        assertions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Experiment;

    fn small_config() -> ExperimentConfig {
        let mut c = ExperimentConfig::new(Experiment::NoiseCheck);
        c.replicas = 4000;
        c.model.eps_jump = 1e-2;
        c.seed = 11;
        c
    }

    #[test]
    fn lambda_zero_is_exact() {
        let r = run_noise_check(&small_config(), &Executor::new(2).unwrap()).unwrap();
        let row = &r.rows[0];
        assert_eq!(row.lambda, 0.0);
        assert_eq!(row.empirical, 1.0);
        assert_eq!(row.target, 1.0);
        assert_eq!(row.se, 0.0);
        assert!(row.pass);
    }

    #[test]
    fn small_run_passes() {
        let r = run_noise_check(&small_config(), &Executor::new(2).unwrap()).unwrap();
        for a in &r.assertions {
            assert!(a.pass, "{}: {}", a.name, a.detail);
        }
    }

    #[test]
    fn bias_bound_scales_with_eps() {
        let m = LevyMeasure::new(1.5).unwrap();
        let b1 = small_jump_bias_bound(&m, 1.0, 1e-4, 1.0, 1.0);
        let b2 = small_jump_bias_bound(&m, 1.0, 5e-5, 1.0, 1.0);
        approx::assert_relative_eq!(b1 / b2, 2f64.powf(0.5), max_relative = 1e-3);
    }

    #[test]
    fn bias_bound_dominates_exact_defect() {
        let m = LevyMeasure::new(1.5).unwrap();
        for &(lambda, eps) in &[(0.25, 1e-2), (1.0, 1e-3), (1.0, 0.5), (4.0, 1.0)] {
            let target = laplace_functional_target(1.5, lambda, 1.0, 1.0);
            let truncated = (m.truncated_laplace_exponent(lambda, eps)).exp();
            let bound = small_jump_bias_bound(&m, lambda, eps, 1.0, target);
            assert!((target - truncated).abs() <= bound * (1.0 + 1e-12));
        }
    }
}
