//! Special functions, quadrature and goodness-of-fit p-values.

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Gamma function (Lanczos approximation, reflection for negative arguments).
pub fn gamma(x: f64) -> f64 {
    statrs::function::gamma::gamma(x)
}

pub fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

pub fn beta(a: f64, b: f64) -> f64 {
    statrs::function::beta::checked_beta(a, b).unwrap_or(f64::NAN)
}

/// `e^{-x} - 1 + x` without cancellation for small `x`.
pub fn exp_defect(x: f64) -> f64 {
    if x.abs() < 1e-3 {
        let x2 = x * x;
        x2 * (0.5 - x / 6.0 + x2 / 24.0 - x2 * x / 120.0)
    } else {
        (-x).exp_m1() + x
    }
}

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WEIGHTS_K: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const GK_WEIGHTS_G: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gauss_kronrod(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = GK_WEIGHTS_K[7] * fc;
    let mut gauss = GK_WEIGHTS_G[3] * fc;
    for i in 0..7 {
        let dx = h * GK_NODES[i];
        let pair = f(c - dx) + f(c + dx);
        kronrod += GK_WEIGHTS_K[i] * pair;
        if i % 2 == 1 {
            gauss += GK_WEIGHTS_G[i / 2] * pair;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Adaptive Gauss-Kronrod (7/15) quadrature of `f` over the finite interval
/// `[a, b]`: the subinterval with the largest error estimate is bisected until
/// the summed estimate falls below `tol` (absolute) or `1e-14` relative, or
/// `MAX_INTERVALS` is reached. Endpoints are never evaluated, so integrable
/// endpoint singularities are fine.
pub fn integrate_adaptive(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    const MAX_INTERVALS: usize = 4000;
    if a == b {
        return 0.0;
    }
    let (v, e) = gauss_kronrod(&f, a, b);
    // (error, left, right, value)
    let mut parts = vec![(e, a, b, v)];
    loop {
        let total: f64 = parts.iter().map(|p| p.3).sum();
        let err: f64 = parts.iter().map(|p| p.0).sum();
        if err <= tol.max(1e-14 * total.abs()) || parts.len() >= MAX_INTERVALS {
            return total;
        }
        let worst = parts
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .0.total_cmp(&y.1 .0))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let (_, l, r, _) = parts.swap_remove(worst);
        let m = 0.5 * (l + r);
        if m <= l || m >= r {
            return total;
        }
        let (lv, le) = gauss_kronrod(&f, l, m);
        let (rv, re) = gauss_kronrod(&f, m, r);
        parts.push((le, l, m, lv));
        parts.push((re, m, r, rv));
    }
}

/// Asymptotic p-value of the one-sample Kolmogorov-Smirnov statistic `d`
/// for a sample of size `n` (with the Stephens small-sample correction).
pub fn ks_p_value(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let x = (sn + 0.12 + 0.11 / sn) * d;
    if x < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * x * x).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Kolmogorov-Smirnov statistic of `sample` against the continuous CDF `cdf`.
/// Sorts `sample` in place.
pub fn ks_statistic(sample: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    sample.sort_by(f64::total_cmp);
    let n = sample.len() as f64;
    sample
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let c = cdf(x);
            (c - i as f64 / n).abs().max(((i + 1) as f64 / n - c).abs())
        })
        .fold(0.0, f64::max)
}

/// Upper tail `P(X >= stat)` of a chi-square distribution.
pub fn chi_square_sf(stat: f64, dof: f64) -> f64 {
    match ChiSquared::new(dof) {
        Ok(d) => d.sf(stat),
        Err(_) => f64::NAN,
    }
}

/// Pearson chi-square test of observed counts against expected probabilities.
/// Returns `(statistic, p_value)`.
pub fn chi_square_test(observed: &[u64], probs: &[f64]) -> (f64, f64) {
    assert_eq!(observed.len(), probs.len());
    let total: u64 = observed.iter().sum();
    let total = total as f64;
    let mut stat = 0.0;
    let mut bins = 0usize;
    for (&o, &p) in observed.iter().zip(probs) {
        if p <= 0.0 {
            continue;
        }
        let e = total * p;
        stat += (o as f64 - e).powi(2) / e;
        bins += 1;
    }
    let dof = bins.saturating_sub(1).max(1) as f64;
    (stat, chi_square_sf(stat, dof))
}
