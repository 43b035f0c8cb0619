//! Exact per-position probability engine.
//!
//! For a fixed coalition size `c`, bias `p` and channel `theta`, a
//! [`PositionModel`] holds every distribution a decoder or parameter
//! calculator needs: the tally pmf, the output marginal, and the four joint
//! tables under the "guilty" (`H0`) and "innocent" (`H1`) hypotheses, in both
//! the per-user (simple) and per-tuple (joint) views. On top of those sit the
//! moment function `M(t)`, mutual informations, score moments, and the
//! numerical bias optimizers.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::model::CollusionChannel;

/// Whether a computation runs over the per-user outcome space `(x, y)` or the
/// per-tuple outcome space `(z, y)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Simple,
    Joint,
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "simple" => Ok(Mode::Simple),
            "joint" => Ok(Mode::Joint),
            _ => Err(Error::InvalidConfig(format!("unknown mode `{s}`"))),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Simple => "simple",
            Mode::Joint => "joint",
        })
    }
}

/// `ln C(n, k)` via log-gamma, stable up to very large `n`.
fn ln_binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    if k == 0 || k == n {
        return 0.0;
    }
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// Binomial pmf evaluated per term in the log domain, so `c` up to 10^4 and
/// biases near the open ends of (0, 1) stay finite. Trivial sizes are exact,
/// which also makes the joint tables at `c = 1` bit-identical to the simple
/// ones.
fn binomial_pmf(n: usize, p: f64) -> Vec<f64> {
    match n {
        0 => return vec![1.0],
        1 => return vec![1.0 - p, p],
        _ => {}
    }
    let ln_p = p.ln();
    let ln_q = (-p).ln_1p();
    (0..=n)
        .map(|k| (ln_binomial(n, k) + k as f64 * ln_p + (n - k) as f64 * ln_q).exp())
        .collect()
}

/// Every exact distribution attached to one code position.
#[derive(Clone, Debug)]
pub struct PositionModel {
    c: usize,
    p: f64,
    theta: Vec<f64>,
    /// `P(Z = z)` for the full coalition tally, `z = 0..=c`.
    tally_pmf: Vec<f64>,
    /// `P(Y = 1)`.
    y_marginal: f64,
    /// `P(Y = 0)`, accumulated directly so it never suffers cancellation.
    y0_marginal: f64,
    /// `f(x, y | H0)`, indexed `[x][y]`.
    simple_h0: [[f64; 2]; 2],
    /// `f(x, y | H1) = f(x) f(y)`, indexed `[x][y]`.
    simple_h1: [[f64; 2]; 2],
    /// `f(z, y | H0) = P(Z = z) P(Y = y | Z = z)`, indexed `[z][y]`.
    joint_h0: Vec<[f64; 2]>,
    /// `f(z, y | H1) = P(Z = z) f(y)`, indexed `[z][y]`.
    joint_h1: Vec<[f64; 2]>,
}

impl PositionModel {
    /// Assemble all tables for bias `p` in the open interval `(0, 1)`.
    ///
    /// The guilty-user table conditions on one colluder's symbol: the other
    /// `c - 1` members tally `z' ~ Binomial(c - 1, p)` and the output follows
    /// `theta[z' + x]`.
    pub fn new(channel: &CollusionChannel, p: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) || p.is_nan() {
            return Err(Error::OutOfRange {
                what: "bias p",
                range: "(0, 1)",
                value: p,
            });
        }
        let c = channel.c();
        let theta = channel.theta().to_vec();
        let tally_pmf = binomial_pmf(c, p);
        let y_marginal: f64 = tally_pmf.iter().zip(&theta).map(|(w, t)| w * t).sum();
        let y0_marginal: f64 = tally_pmf
            .iter()
            .zip(&theta)
            .map(|(w, t)| w * (1.0 - t))
            .sum();

        let rest_pmf = binomial_pmf(c.saturating_sub(1), p);
        let f_x = [1.0 - p, p];
        let mut simple_h0 = [[0.0; 2]; 2];
        let mut simple_h1 = [[0.0; 2]; 2];
        for x in 0..2 {
            let y1: f64 = rest_pmf
                .iter()
                .enumerate()
                .map(|(z, w)| w * theta[z + x])
                .sum();
            let y0: f64 = rest_pmf
                .iter()
                .enumerate()
                .map(|(z, w)| w * (1.0 - theta[z + x]))
                .sum();
            simple_h0[x][0] = f_x[x] * y0;
            simple_h0[x][1] = f_x[x] * y1;
            simple_h1[x][0] = f_x[x] * y0_marginal;
            simple_h1[x][1] = f_x[x] * y_marginal;
        }

        let joint_h0 = tally_pmf
            .iter()
            .zip(&theta)
            .map(|(w, t)| [w * (1.0 - t), w * t])
            .collect();
        let joint_h1 = tally_pmf
            .iter()
            .map(|w| [w * y0_marginal, w * y_marginal])
            .collect();

        Ok(Self {
            c,
            p,
            theta,
            tally_pmf,
            y_marginal,
            y0_marginal,
            simple_h0,
            simple_h1,
            joint_h0,
            joint_h1,
        })
    }

    pub fn c(&self) -> usize {
        self.c
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    /// `P(Z = z)` over `z = 0..=c`.
    pub fn tally_pmf(&self) -> &[f64] {
        &self.tally_pmf
    }

    /// `P(Y = y)` under a bias-`p` coalition.
    pub fn y_marginal(&self, y: u8) -> f64 {
        if y == 1 {
            self.y_marginal
        } else {
            self.y0_marginal
        }
    }

    pub fn simple_h0(&self, x: u8, y: u8) -> f64 {
        self.simple_h0[x as usize][y as usize]
    }

    pub fn simple_h1(&self, x: u8, y: u8) -> f64 {
        self.simple_h1[x as usize][y as usize]
    }

    pub fn joint_h0(&self, z: usize, y: u8) -> f64 {
        self.joint_h0[z][y as usize]
    }

    pub fn joint_h1(&self, z: usize, y: u8) -> f64 {
        self.joint_h1[z][y as usize]
    }

    /// Iterate `(f_H0, f_H1)` pairs over the outcome space of `mode`.
    fn table_pairs(&self, mode: Mode) -> Vec<(f64, f64)> {
        match mode {
            Mode::Simple => (0..2)
                .flat_map(|x| (0..2).map(move |y| (self.simple_h0[x][y], self.simple_h1[x][y])))
                .collect(),
            Mode::Joint => self
                .joint_h0
                .iter()
                .zip(&self.joint_h1)
                .flat_map(|(a, b)| [(a[0], b[0]), (a[1], b[1])])
                .collect(),
        }
    }
}

/// The Chernoff-type moment function
/// `M(t) = sum f_H0^t f_H1^(1-t)` over the outcome space of `mode`.
///
/// Outcomes with `f_H0 = 0` contribute nothing for `t > 0` (the vanishing
/// factor wins), and `0^0 = 1` at the ends so that `M(0) = M(1) = 1`.
pub fn moment_fn(model: &PositionModel, t: f64, mode: Mode) -> Result<f64> {
    if !(0.0..=1.0).contains(&t) || t.is_nan() {
        return Err(Error::OutOfRange {
            what: "moment parameter t",
            range: "[0, 1]",
            value: t,
        });
    }
    let mut total = 0.0;
    for (f0, f1) in model.table_pairs(mode) {
        if f0 <= 0.0 {
            if t == 0.0 {
                total += f1;
            }
        } else if f1 <= 0.0 {
            if t == 1.0 {
                total += f0;
            }
        } else {
            total += (t * f0.ln() + (1.0 - t) * f1.ln()).exp();
        }
    }
    Ok(total)
}

fn kl_bits(pairs: impl IntoIterator<Item = (f64, f64)>) -> f64 {
    let mut total = 0.0;
    for (f0, f1) in pairs {
        if f0 > 0.0 {
            total += f0 * (f0 / f1).log2();
        }
    }
    // Divergences are nonnegative; near-degenerate channels can cancel to a
    // tiny negative in floating point.
    total.max(0.0)
}

/// `I(X_1; Y | P = p)` in bits: what one colluder's symbol reveals about the
/// output. Governs simple-decoder code lengths.
pub fn mutual_info_simple(model: &PositionModel) -> f64 {
    kl_bits(model.table_pairs(Mode::Simple))
}

/// `I(Z; Y | P = p)` in bits: what the whole tally reveals about the output.
/// Divide by `c` for the joint-decoder rate.
pub fn mutual_info_joint(model: &PositionModel) -> f64 {
    kl_bits(model.table_pairs(Mode::Joint))
}

fn info(channel: &CollusionChannel, p: f64, mode: Mode) -> f64 {
    let model = PositionModel::new(channel, p).expect("p inside (0,1)");
    match mode {
        Mode::Simple => mutual_info_simple(&model),
        Mode::Joint => mutual_info_joint(&model),
    }
}

/// Maximize the mode's mutual information over `p` in `(0, 1)`.
///
/// A 512-point scan brackets the best grid point (guarding channels whose
/// optimum sits at `p = O(1/c)` near the boundary), then golden-section
/// refinement shrinks the bracket well below the 1e-6 contract.
pub fn optimal_bias(channel: &CollusionChannel, mode: Mode) -> f64 {
    const GRID: usize = 512;
    let grid: Vec<f64> = (1..=GRID).map(|k| k as f64 / (GRID + 1) as f64).collect();
    let vals: Vec<f64> = grid.iter().map(|&p| info(channel, p, mode)).collect();
    let best = vals
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap();
    let mut lo = if best == 0 { 1e-9 } else { grid[best - 1] };
    let mut hi = if best == GRID - 1 {
        1.0 - 1e-9
    } else {
        grid[best + 1]
    };

    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = info(channel, x1, mode);
    let mut f2 = info(channel, x2, mode);
    while hi - lo > 1e-9 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = info(channel, x2, mode);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = info(channel, x1, mode);
        }
    }
    0.5 * (lo + hi)
}

/// Solve `P(Y = 1 | p) = 1/2` for a deterministic, non-constant channel.
///
/// The output rate is scanned on a fine grid; each sign change is bisected to
/// 1e-12. Monotone channels (all-1, odd-c majority) have a single root.
/// Channels like minority voting can balance at several biases, in which case
/// the root nearest the joint-capacity-optimal bias is returned.
pub fn deterministic_balance_bias(channel: &CollusionChannel) -> Result<f64> {
    if !channel.is_deterministic() {
        return Err(Error::NotDeterministic);
    }
    let c = channel.c();
    let rate = |p: f64| -> f64 {
        binomial_pmf(c, p)
            .iter()
            .zip(channel.theta())
            .map(|(w, t)| w * t)
            .sum::<f64>()
            - 0.5
    };

    const LO: f64 = 1e-12;
    const HI: f64 = 1.0 - 1e-12;
    const STEPS: usize = 1024;
    let mut roots = Vec::new();
    let mut prev_p = LO;
    let mut prev_g = rate(LO);
    for k in 1..=STEPS {
        let p = LO + (HI - LO) * k as f64 / STEPS as f64;
        let g = rate(p);
        if prev_g == 0.0 {
            roots.push(prev_p);
        } else if prev_g * g < 0.0 {
            let (mut a, mut b) = (prev_p, p);
            let mut ga = prev_g;
            while b - a > 1e-12 {
                let mid = 0.5 * (a + b);
                let gm = rate(mid);
                if gm == 0.0 {
                    a = mid;
                    b = mid;
                } else if ga * gm < 0.0 {
                    b = mid;
                } else {
                    a = mid;
                    ga = gm;
                }
            }
            roots.push(0.5 * (a + b));
        }
        prev_p = p;
        prev_g = g;
    }
    match roots.len() {
        0 => Err(Error::NoBalanceRoot),
        1 => Ok(roots[0]),
        _ => {
            let target = optimal_bias(channel, Mode::Joint);
            Ok(roots
                .into_iter()
                .min_by(|a, b| (a - target).abs().total_cmp(&(b - target).abs()))
                .unwrap())
        }
    }
}

/// Exact first and second moments of a per-position score under both
/// hypotheses.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreMoments {
    pub mu0: f64,
    pub mu1: f64,
    pub var0: f64,
    pub var1: f64,
}

/// Enumerate the outcome table and take exact expectations of `score`.
///
/// In `Simple` mode the score is called as `score(x, y)` with `x` in `{0, 1}`;
/// in `Joint` mode as `score(z, y)` with `z` in `0..=c`. A score of `-inf` on
/// an outcome of positive probability makes that hypothesis' mean `-inf` and
/// variance `+inf` rather than erroring: zero-probability outcomes under the
/// other hypothesis are routine under marking channels.
pub fn score_moments(
    model: &PositionModel,
    mode: Mode,
    score: impl Fn(usize, u8) -> f64,
) -> ScoreMoments {
    let outcomes: Vec<(usize, u8)> = match mode {
        Mode::Simple => vec![(0, 0), (0, 1), (1, 0), (1, 1)],
        Mode::Joint => (0..=model.c()).flat_map(|z| [(z, 0), (z, 1)]).collect(),
    };
    let prob = |h: usize, z: usize, y: u8| -> f64 {
        match (h, mode) {
            (0, Mode::Simple) => model.simple_h0(z as u8, y),
            (0, Mode::Joint) => model.joint_h0(z, y),
            (_, Mode::Simple) => model.simple_h1(z as u8, y),
            (_, Mode::Joint) => model.joint_h1(z, y),
        }
    };
    let mut out = [[0.0f64; 2]; 2]; // [hypothesis][mu, var]
    for (h, slot) in out.iter_mut().enumerate() {
        let mut mean = 0.0f64;
        let mut second = 0.0f64;
        let mut infinite = false;
        for &(z, y) in &outcomes {
            let w = prob(h, z, y);
            if w <= 0.0 {
                continue;
            }
            let s = score(z, y);
            if s == f64::NEG_INFINITY {
                infinite = true;
                break;
            }
            mean += w * s;
            second += w * s * s;
        }
        if infinite {
            *slot = [f64::NEG_INFINITY, f64::INFINITY];
        } else {
            *slot = [mean, (second - mean * mean).max(0.0)];
        }
    }
    ScoreMoments {
        mu0: out[0][0],
        mu1: out[1][0],
        var0: out[0][1],
        var1: out[1][1],
    }
}

/// Gaussian divergence summary of a score's separating power.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KlIndicator {
    /// `(mu0 - mu1)^2 / var1 + (var0/var1 - 1 - ln(var0/var1)) / 2`.
    pub divergence: f64,
    /// The first term alone; the classical performance indicator.
    pub performance_indicator: f64,
    /// Set when `var0 <= 0` forced the variance term to be dropped.
    pub variance_term_omitted: bool,
}

/// Divergence between the Gaussian approximations of total guilty and
/// innocent scores. `var1` must be positive; a degenerate `var0` drops the
/// second term and flags it.
pub fn kl_indicator(mu0: f64, mu1: f64, var0: f64, var1: f64) -> Result<KlIndicator> {
    if var1 <= 0.0 || var1.is_nan() {
        return Err(Error::NonPositiveVariance(var1));
    }
    let performance_indicator = (mu0 - mu1) * (mu0 - mu1) / var1;
    if var0 > 0.0 {
        let ratio = var0 / var1;
        Ok(KlIndicator {
            divergence: performance_indicator + 0.5 * (ratio - 1.0 - ratio.ln()),
            performance_indicator,
            variance_term_omitted: false,
        })
    } else {
        Ok(KlIndicator {
            divergence: performance_indicator,
            performance_indicator,
            variance_term_omitted: true,
        })
    }
}
