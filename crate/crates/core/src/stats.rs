//! Monte Carlo summaries.

use serde::{Deserialize, Serialize};

/// Sample mean and standard error over the non-aborted replicas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MCSummary {
    pub estimate: f64,
    pub std_error: f64,
    /// Replicas attempted, including aborted ones.
    pub replicas: u64,
    pub aborted: u64,
    pub seed: u64,
}

impl MCSummary {
    /// Summarizes `values` (in replica order) plus `aborted` replicas that
    /// produced no value.
    pub fn from_values(values: &[f64], aborted: u64, seed: u64) -> Self {
        let (mean, se) = mean_and_se(values);
        MCSummary {
            estimate: mean,
            std_error: se,
            replicas: values.len() as u64 + aborted,
            aborted,
            seed,
        }
    }

    pub fn abort_fraction(&self) -> f64 {
        if self.replicas == 0 {
            0.0
        } else {
            self.aborted as f64 / self.replicas as f64
        }
    }
}

/// Mean and standard error of the mean, summed in slice order. The standard
/// error is zero for fewer than two values.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_values_have_zero_error() {
        let s = MCSummary::from_values(&[1.0; 10], 2, 5);
        assert_eq!(s.estimate, 1.0);
        assert_eq!(s.std_error, 0.0);
        assert_eq!(s.replicas, 12);
        assert!((s.abort_fraction() - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn known_mean_and_se() {
        let (m, se) = mean_and_se(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((se - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn serde_round_trip() {
        let s = MCSummary::from_values(&[0.1, 0.7, 0.3], 0, 9);
        let back: MCSummary = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(s, back);
    }
}
