//! Small statistics helpers shared by the simulation harness and its tests.

use serde::{Deserialize, Serialize};

/// `Phi^-1(0.975)`: the 95% two-sided normal critical value.
const Z95: f64 = 1.959_963_984_540_054;

/// Wilson score interval for a binomial proportion at 95% confidence.
///
/// With zero successes the upper endpoint is `z^2 / (t + z^2)`, which is what
/// makes it usable for rare-event rates where the Wald interval collapses.
pub fn wilson_interval(successes: u64, trials: u64) -> (f64, f64) {
    assert!(trials > 0, "wilson interval needs at least one trial");
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let center = p + z2 / (2.0 * n);
    let spread = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    (
        ((center - spread) / denom).max(0.0),
        ((center + spread) / denom).min(1.0),
    )
}

/// First four standardized sample moments.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleMoments {
    pub count: usize,
    pub mean: f64,
    /// Unbiased (n-1) variance.
    pub variance: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
}

pub fn sample_moments(data: &[f64]) -> SampleMoments {
    let n = data.len();
    assert!(n >= 2, "moments need at least two samples");
    let nf = n as f64;
    let mean = data.iter().sum::<f64>() / nf;
    let mut m2 = 0.0;
    let mut m3 = 0.0;
    let mut m4 = 0.0;
    for &x in data {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= nf;
    m3 /= nf;
    m4 /= nf;
    let sd = m2.sqrt();
    SampleMoments {
        count: n,
        mean,
        variance: m2 * nf / (nf - 1.0),
        skewness: m3 / (sd * sd * sd),
        excess_kurtosis: m4 / (m2 * m2) - 3.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn wilson_zero_successes_upper_bound() {
        let (lo, hi) = wilson_interval(0, 1000);
        assert!(lo.abs() < 1e-12);
        let z2 = Z95 * Z95;
        assert_relative_eq!(hi, z2 / (1000.0 + z2), epsilon = 1e-12);
        assert!((hi - 3.84 / 1003.84).abs() < 1e-4);
    }

    #[test]
    fn wilson_brackets_the_point_estimate() {
        for (k, t) in [(1u64, 10u64), (50, 100), (999, 1000)] {
            let (lo, hi) = wilson_interval(k, t);
            let p = k as f64 / t as f64;
            assert!(lo <= p && p <= hi);
            assert!((0.0..=1.0).contains(&lo) && (0.0..=1.0).contains(&hi));
        }
    }

    #[test]
    fn moments_of_a_symmetric_two_point_sample() {
        let data = vec![-1.0, 1.0, -1.0, 1.0];
        let m = sample_moments(&data);
        assert_eq!(m.mean, 0.0);
        assert_relative_eq!(m.variance, 4.0 / 3.0, epsilon = 1e-12);
        assert_eq!(m.skewness, 0.0);
        assert_relative_eq!(m.excess_kurtosis, -2.0, epsilon = 1e-12);
    }
}
