//! Bias sampling and code-matrix generation.

use rand::distributions::Open01;
use rand::Rng;

use crate::error::Result;
use crate::model::{BiasDistribution, Code};

/// Exact inverse-CDF transform of the arcsine law restricted to
/// `[delta, 1 - delta]`: branch-free, and the cut-off is just a parameter.
pub fn arcsine_quantile(cutoff: f64, u: f64) -> f64 {
    let a = cutoff.sqrt().asin();
    let s = (a + u * (std::f64::consts::FRAC_PI_2 - 2.0 * a)).sin();
    s * s
}

/// Draw `ell` i.i.d. biases.
///
/// Arcsine draws take `u` from the open interval `(0, 1)`, so even without a
/// cut-off no bias ever lands exactly on 0 or 1.
pub fn sample_biases(dist: &BiasDistribution, ell: usize, rng: &mut impl Rng) -> Vec<f64> {
    match *dist {
        BiasDistribution::FixedP(p) => vec![p; ell],
        BiasDistribution::Arcsine { cutoff } => (0..ell)
            .map(|_| arcsine_quantile(cutoff, rng.sample(Open01)))
            .collect(),
    }
}

/// Generate an `n x ell` code: bit `(j, i)` is an independent
/// `Bernoulli(biases[i])` draw, filled row by row (user-major).
pub fn generate_code(n: usize, biases: &[f64], rng: &mut impl Rng) -> Result<Code> {
    let ell = biases.len();
    let mut bits = Vec::with_capacity(n * ell);
    for _user in 0..n {
        for &p in biases {
            let u: f64 = rng.gen();
            bits.push(u8::from(u < p));
        }
    }
    Code::new(n, ell, bits, biases.to_vec())
}
