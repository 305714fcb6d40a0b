//! Iterated Grönwall bound for `f(t) <= c + c int_0^t (t - r)^{-gamma} f(r) dr`
//! and a Picard-iteration oracle for the extremal solution.
//!
//! Substituting the hypothesis into itself `k` times gives
//! `f(t) <= A_k(t) + K_k int_0^t (t - r)^{e_k} f(r) dr` with
//! `e_j = j - (j + 1) gamma`, and once `e_k >= 0` the kernel is bounded by
//! `T^{e_k}`, so the classical lemma yields `f(t) <= A_k(t) exp(K_k T^{e_k} t)`.
//! The constants grow like `c^{k+1}` times Beta functions, which overflows
//! `f64` quickly, so everything is kept in log space.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{fmt_f64, Assertion, Executor, Table};
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::special::{beta, exp_defect, integrate_adaptive};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GronwallBound {
    pub c: f64,
    pub gamma: f64,
    pub horizon: f64,
    /// Number of substitutions: the smallest `k >= 1` with `gamma < k/(k+1)`.
    pub k: u32,
    /// `(ln coefficient, power)` of the terms of `A_k(t) - c`.
    terms: Vec<(f64, f64)>,
    /// `ln K_k`.
    ln_kernel: f64,
    /// `e_k >= 0`.
    exponent: f64,
}

impl GronwallBound {
    pub fn new(c: f64, gamma: f64, horizon: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::invalid("gamma", "must lie in (0, 1)"));
        }
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::invalid("c", "must be positive"));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::invalid("horizon", "must be positive"));
        }
        let mut k = 1u32;
        while gamma >= k as f64 / (k as f64 + 1.0) {
            k += 1;
        }
        let ln_c = c.ln();
        let mut ln_kernel = ln_c;
        let mut e = -gamma;
        let mut terms = Vec::with_capacity(k as usize);
        for _ in 0..k {
            // int_0^t (t-u)^{e} c du and the Beta-function convolution of kernels
            terms.push((ln_kernel + ln_c - (e + 1.0).ln(), e + 1.0));
            ln_kernel += ln_c + beta(e + 1.0, 1.0 - gamma).ln();
            e += 1.0 - gamma;
        }
        Ok(GronwallBound {
            c,
            gamma,
            horizon,
            k,
            terms,
            ln_kernel,
            exponent: e.max(0.0),
        })
    }

    /// `ln A_k(t)`.
    pub fn ln_prefactor(&self, t: f64) -> f64 {
        let t = t.max(0.0);
        let mut logs = vec![self.c.ln()];
        if t > 0.0 {
            logs.extend(self.terms.iter().map(|(a, p)| a + p * t.ln()));
        }
        log_sum_exp(&logs)
    }

    /// `ln K_k T^{e_k}`, the log of the Grönwall rate.
    pub fn ln_rate(&self) -> f64 {
        self.ln_kernel + self.exponent * self.horizon.ln()
    }

    /// Logarithm of the bound at `t`.
    pub fn ln_value(&self, t: f64) -> f64 {
        self.ln_prefactor(t) + self.ln_rate().exp() * t.max(0.0)
    }

    /// The bound itself; `+inf` when it exceeds the `f64` range.
    pub fn value(&self, t: f64) -> f64 {
        self.ln_value(t).exp()
    }
}

fn log_sum_exp(logs: &[f64]) -> f64 {
    let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + logs.iter().map(|l| (l - m).exp()).sum::<f64>().ln()
}

/// Picard iterates of `f = c + c int_0^t (t - r)^{-gamma} f(r) dr` on the
/// uniform grid `t_i = i T / nodes`, starting from `f = c`. The integral uses
/// piecewise-linear interpolation of `f` against the exact kernel, so the
/// singularity at `r = t` is integrated in closed form.
pub fn picard_oracle(c: f64, gamma: f64, horizon: f64, nodes: usize, iterations: usize) -> Result<Vec<f64>> {
    if nodes == 0 {
        return Err(Error::invalid("nodes", "must be positive"));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::invalid("gamma", "must lie in (0, 1)"));
    }
    let h = horizon / nodes as f64;
    let scale = h.powf(1.0 - gamma);
    let g1 = 1.0 - gamma;
    let g2 = 2.0 - gamma;
    // weights for an interval whose right end lies d-1 steps before t_i
    let mut left = vec![0.0; nodes + 1];
    let mut right = vec![0.0; nodes + 1];
    for d in 1..=nodes {
        let (df, dm) = (d as f64, d as f64 - 1.0);
        let p0 = (df.powf(g1) - dm.powf(g1)) / g1;
        let p1 = (df.powf(g2) - dm.powf(g2)) / g2;
        right[d] = scale * (df * p0 - p1);
        left[d] = scale * (p1 - dm * p0);
    }
    let mut f = vec![c; nodes + 1];
    let mut next = vec![0.0; nodes + 1];
    for _ in 0..iterations {
        next[0] = c;
        for i in 1..=nodes {
            let mut acc = 0.0;
            for j in 0..i {
                let d = i - j;
                acc += left[d] * f[j] + right[d] * f[j + 1];
            }
            next[i] = c + c * acc;
        }
        std::mem::swap(&mut f, &mut next);
    }
    Ok(f)
}

/// `g(r, y) = int_0^r (e^{-lambda y} - 1 + lambda y) lambda^{-ab-1} d lambda`.
pub fn g_function(r: f64, y: f64, alphabeta: f64) -> Result<f64> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::invalid("r", "must be positive"));
    }
    if !(y >= 0.0 && y.is_finite()) {
        return Err(Error::invalid("y", "must be finite and non-negative"));
    }
    if y == 0.0 {
        return Ok(0.0);
    }
    Ok(integrate_adaptive(
        |l| exp_defect(l * y) * l.powf(-alphabeta - 1.0),
        0.0,
        r,
        1e-13,
    ))
}

/// Closed-form upper bound for `g(1/n, y)`:
/// `2/(alpha(beta+1)) y^{alpha(beta+1)/2} 2/(alpha - alpha beta) n^{-(alpha - alpha beta)/2}`.
pub fn g_bound(n: f64, y: f64, alpha: f64, beta: f64) -> f64 {
    let p = alpha * (beta + 1.0) / 2.0;
    let gap = alpha - alpha * beta;
    (1.0 / p) * y.powf(p) * (2.0 / gap) * n.powf(-gap / 2.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GronwallRow {
    pub gamma: f64,
    pub c: f64,
    pub k: u32,
    /// `min_t (ln bound(t) - ln oracle(t))` over the comparison points.
    pub min_log_margin: f64,
    pub oracle_at_horizon: f64,
    pub ln_bound_at_horizon: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GPair {
    pub n: u64,
    pub y: f64,
    pub g: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GronwallReport {
    pub seed: u64,
    pub rows: Vec<GronwallRow>,
    pub g_pairs: Vec<GPair>,
    pub assertions: Vec<Assertion>,
}

impl GronwallReport {
    pub fn table(&self) -> Table {
        Table {
            columns: vec!["gamma", "c", "k", "min_log_margin", "oracle_at_horizon", "ln_bound_at_horizon", "pass"],
            rows: self
                .rows
                .iter()
                .map(|r| {
                    vec![
                        fmt_f64(r.gamma),
                        fmt_f64(r.c),
                        r.k.to_string(),
                        fmt_f64(r.min_log_margin),
                        fmt_f64(r.oracle_at_horizon),
                        fmt_f64(r.ln_bound_at_horizon),
                        r.pass.to_string(),
                    ]
                })
                .collect(),
        }
    }
}

pub const G_PAIRS: u64 = 100;

pub fn run_gronwall_check(config: &ExperimentConfig, exec: &Executor) -> Result<GronwallReport> {
    let s = &config.gronwall;
    let cases: Vec<(f64, f64)> = s.gammas.iter().flat_map(|&g| s.cs.iter().map(move |&c| (g, c))).collect();
    let rows = exec.try_map_replicas(cases.len() as u64, |i| {
        let (gamma, c) = cases[i as usize];
        let bound = GronwallBound::new(c, gamma, s.horizon)?;
        let oracle = picard_oracle(c, gamma, s.horizon, s.oracle_nodes, s.picard_iterations)?;
        let h = s.horizon / s.oracle_nodes as f64;
        let mut margin = f64::INFINITY;
        for p in 1..=s.points {
            let idx = ((p * s.oracle_nodes) as f64 / s.points as f64).round() as usize;
            margin = margin.min(bound.ln_value(idx as f64 * h) - oracle[idx].ln());
        }
        Ok(GronwallRow {
            gamma,
            c,
            k: bound.k,
            min_log_margin: margin,
            oracle_at_horizon: oracle[s.oracle_nodes],
            ln_bound_at_horizon: bound.ln_value(s.horizon),
            pass: margin >= 0.0,
        })
    })?;

    let (alpha, beta) = (config.model.alpha, config.model.beta);
    let mut rng = super::aux_stream(config.seed, 0x200).rng();
    let mut g_pairs = Vec::with_capacity(G_PAIRS as usize);
    for _ in 0..G_PAIRS {
        let n: u64 = rng.random_range(2..=128);
        let y = 10f64.powf(rng.random_range(-3.0..2.0));
        g_pairs.push(GPair {
            n,
            y,
            g: g_function(1.0 / n as f64, y, alpha * beta)?,
            bound: g_bound(n as f64, y, alpha, beta),
        });
    }

    let mut assertions: Vec<Assertion> = rows
        .iter()
        .map(|r| {
            Assertion::new(
                format!("bound dominates oracle gamma={} c={}", r.gamma, r.c),
                r.pass,
                format!("k={}, min log margin {:.4e}", r.k, r.min_log_margin),
            )
        })
        .collect();
    let worst = g_pairs.iter().map(|p| p.g / p.bound).fold(0.0, f64::max);
    assertions.push(Assertion::new(
        "g below closed-form bound",
        g_pairs.iter().all(|p| p.g <= p.bound),
        format!("max g/bound over {G_PAIRS} pairs = {worst:.4}"),
    ));
    Ok(GronwallReport {
        seed: config.seed,
        rows,
        g_pairs,
        assertions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::gamma as gamma_fn;

    /// `c E_{1-gamma}(c Gamma(1-gamma) t^{1-gamma})`, the exact solution.
    fn mittag_leffler_solution(c: f64, gamma: f64, t: f64) -> f64 {
        let b = 1.0 - gamma;
        let z = c * gamma_fn(b) * t.powf(b);
        let mut sum = 0.0;
        for m in 0..200 {
            let term = (m as f64 * z.ln() - crate::special::ln_gamma(b * m as f64 + 1.0)).exp();
            sum += if m == 0 { 1.0 } else { term };
            if m > 5 && term < 1e-17 * sum {
                break;
            }
        }
        c * sum
    }

    #[test]
    fn substitution_count() {
        assert_eq!(GronwallBound::new(1.0, 0.3, 1.0).unwrap().k, 1);
        assert_eq!(GronwallBound::new(1.0, 0.5, 1.0).unwrap().k, 2);
        assert_eq!(GronwallBound::new(1.0, 0.6, 1.0).unwrap().k, 2);
        assert_eq!(GronwallBound::new(1.0, 0.9, 1.0).unwrap().k, 10);
    }

    #[test]
    fn one_substitution_constants() {
        // gamma < 1/2: A_1 = c + c^2 t^{1-g}/(1-g), K_1 = c^2 B(1-g, 1-g)
        let (c, g) = (0.5, 0.3);
        let b = GronwallBound::new(c, g, 2.0).unwrap();
        let t: f64 = 0.7;
        let a1 = c + c * c * t.powf(1.0 - g) / (1.0 - g);
        approx::assert_relative_eq!(b.ln_prefactor(t).exp(), a1, max_relative = 1e-13);
        let k1 = c * c * beta(1.0 - g, 1.0 - g) * 2.0f64.powf(1.0 - 2.0 * g);
        approx::assert_relative_eq!(b.ln_rate().exp(), k1, max_relative = 1e-13);
        approx::assert_relative_eq!(b.value(t), a1 * (k1 * t).exp(), max_relative = 1e-12);
    }

    #[test]
    fn bound_starts_at_c_and_is_monotone() {
        for &g in &[0.3, 0.6, 0.9] {
            let mut prev_c = f64::NEG_INFINITY;
            for &c in &[0.5, 1.0, 2.0] {
                let b = GronwallBound::new(c, g, 1.0).unwrap();
                approx::assert_relative_eq!(b.value(0.0), c, max_relative = 1e-14);
                let mut prev = f64::NEG_INFINITY;
                for i in 0..=50 {
                    let v = b.ln_value(i as f64 / 50.0);
                    assert!(v >= prev);
                    assert!(v >= c.ln() - 1e-15);
                    prev = v;
                }
                assert!(b.ln_value(1.0) >= prev_c);
                prev_c = b.ln_value(1.0);
            }
        }
    }

    #[test]
    fn picard_matches_mittag_leffler() {
        for &(c, g) in &[(0.5, 0.3), (1.0, 0.6), (1.0, 0.3)] {
            let f = picard_oracle(c, g, 1.0, 1000, 60).unwrap();
            for &i in &[100usize, 500, 1000] {
                let exact = mittag_leffler_solution(c, g, i as f64 / 1000.0);
                approx::assert_relative_eq!(f[i], exact, max_relative = 2e-3);
            }
        }
    }

    #[test]
    fn picard_of_constant_kernel_weights_integrate_exactly() {
        // one iterate from f = c: c + c^2 t^{1-g}/(1-g), exact for linear interpolation
        let (c, g) = (2.0, 0.9);
        let f = picard_oracle(c, g, 1.0, 200, 1).unwrap();
        for (i, v) in f.iter().enumerate() {
            let t = i as f64 / 200.0;
            approx::assert_relative_eq!(*v, c + c * c * t.powf(1.0 - g) / (1.0 - g), max_relative = 1e-11);
        }
    }

    #[test]
    fn g_at_zero_and_monotone() {
        assert_eq!(g_function(0.5, 0.0, 1.2).unwrap(), 0.0);
        let a = g_function(0.1, 1.0, 1.2).unwrap();
        let b = g_function(0.2, 1.0, 1.2).unwrap();
        let c = g_function(0.2, 2.0, 1.2).unwrap();
        assert!(0.0 < a && a < b && b < c);
    }

    #[test]
    fn g_small_argument_series() {
        // for small r y the integrand is y^2 l^{1-ab}/2 - y^3 l^{2-ab}/6 + ...
        let (r, y, ab): (f64, f64, f64) = (1e-3, 0.5, 1.2);
        let series = y * y / 2.0 * r.powf(2.0 - ab) / (2.0 - ab) - y.powi(3) / 6.0 * r.powf(3.0 - ab) / (3.0 - ab)
            + y.powi(4) / 24.0 * r.powf(4.0 - ab) / (4.0 - ab);
        approx::assert_relative_eq!(g_function(r, y, ab).unwrap(), series, max_relative = 1e-9);
    }

    #[test]
    fn default_check_passes() {
        let c = ExperimentConfig::new(crate::config::Experiment::Gronwall);
        let r = run_gronwall_check(&c, &Executor::new(2).unwrap()).unwrap();
        assert_eq!(r.rows.len(), 9);
        for a in &r.assertions {
            assert!(a.pass, "{}: {}", a.name, a.detail);
        }
    }

    #[test]
    fn g_below_closed_form_bound() {
        for n in [2u32, 4, 16, 128] {
            for &y in &[1e-3, 0.1, 1.0, 10.0, 100.0] {
                let g = g_function(1.0 / n as f64, y, 1.2).unwrap();
                assert!(g <= g_bound(n as f64, y, 1.5, 0.8), "n={n} y={y}");
            }
        }
    }
}
