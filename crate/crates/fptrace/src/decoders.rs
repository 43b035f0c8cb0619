//! Score functions and accusation rules.
//!
//! Every simple score is a per-position function of `(x, y, p)`; a user's
//! total is the sum over positions and `-inf` absorbs (a single impossible
//! observation permanently exonerates under the matched channel). Joint
//! scores replace the user bit by the tuple tally `z`.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::model::{Code, PirateOutput};
use crate::probability::PositionModel;

/// Refuse joint enumeration past this many tuples; results stay exact, never
/// subsampled. Desk-scale joint runs use small `n` and `c`.
pub const TUPLE_CAP: f64 = 5e6;

/// Log-likelihood ratio of "this user is a colluder" against "this user is
/// independent of the output", per position. `-inf` where the guilty
/// hypothesis gives the observation probability zero; the innocent table
/// never vanishes alone because it factorizes over a superset support.
pub fn simple_llr(x: u8, y: u8, model: &PositionModel) -> f64 {
    let f0 = model.simple_h0(x, y);
    if f0 <= 0.0 {
        f64::NEG_INFINITY
    } else {
        (f0 / model.simple_h1(x, y)).ln()
    }
}

/// Closed form of [`simple_llr`] against the interleaving attack; the
/// universal decoder for arbitrary marking channels.
pub fn interleaving_g(x: u8, y: u8, p: f64, c: usize) -> f64 {
    let cf = c as f64;
    if x == y {
        if x == 0 {
            (p / (cf * (1.0 - p))).ln_1p()
        } else {
            ((1.0 - p) / (cf * p)).ln_1p()
        }
    } else {
        // c = 1 makes a mismatch impossible: ln 0.
        (-1.0 / cf).ln_1p()
    }
}

/// The Lagrange-optimized comparison score (`c`-scaled relative to
/// [`interleaving_g`]): `p/(1-p)`, `-1`, `(1-p)/p` for match-0, mismatch,
/// match-1. Blows up near the bias boundaries, which is exactly the contrast
/// the score-distribution experiments exercise.
pub fn oosterwijk_h(x: u8, y: u8, p: f64) -> f64 {
    if x == y {
        if x == 0 {
            p / (1.0 - p)
        } else {
            (1.0 - p) / p
        }
    } else {
        -1.0
    }
}

/// Bayesian approximation of the empirical-mutual-information score with
/// prior guilt probability `c/n`:
/// `m = ln(1 + (c/n) (f_H0/f_H1 - 1))`.
///
/// Stays finite even where the likelihood ratio vanishes:
/// `m(1, 0) = ln(1 - c/n)`. At `c = n` it degenerates to [`simple_llr`].
pub fn emi_bayes_m(x: u8, y: u8, model: &PositionModel, n: u64) -> f64 {
    debug_assert!(n as usize >= model.c(), "prior needs n >= c");
    let frac = model.c() as f64 / n as f64;
    let f0 = model.simple_h0(x, y);
    if f0 <= 0.0 {
        return (-frac).ln_1p();
    }
    (frac * (f0 / model.simple_h1(x, y) - 1.0)).ln_1p()
}

/// Joint log-likelihood ratio for a size-`c` tuple with tally `z`:
/// `ln(f(z,y|H0)/f(z,y|H1)) = ln(P(Y=y|Z=z) / P(Y=y))`.
pub fn joint_llr(z: usize, y: u8, model: &PositionModel) -> f64 {
    let f0 = model.joint_h0(z, y);
    if f0 <= 0.0 {
        f64::NEG_INFINITY
    } else {
        (f0 / model.joint_h1(z, y)).ln()
    }
}

/// Closed form of [`joint_llr`] against the interleaving attack: the score
/// only measures how far the tuple tally sits from its expectation `c p`.
pub fn joint_interleaving_g(z: usize, y: u8, p: f64, c: usize) -> f64 {
    let frac = z as f64 / c as f64;
    if y == 1 {
        frac.ln() - p.ln()
    } else {
        (1.0 - frac).ln() - (1.0 - p).ln()
    }
}

/// Sum a per-position score over every user's code word.
///
/// `score(x, y, i)` is called with the user's bit, the pirate bit, and the
/// position index (so table-backed scores can depend on `p_i`).
pub fn user_scores(
    code: &Code,
    y: &PirateOutput,
    score: impl Fn(u8, u8, usize) -> f64,
) -> Result<Vec<f64>> {
    if y.len() != code.ell() {
        return Err(Error::DimensionMismatch(format!(
            "pirate output has length {}, code has {}",
            y.len(),
            code.ell()
        )));
    }
    let ys = y.bits();
    Ok((0..code.n())
        .map(|j| {
            code.row(j)
                .iter()
                .zip(ys)
                .enumerate()
                .map(|(i, (&x, &yi))| score(x, yi, i))
                .sum()
        })
        .collect())
}

/// Exact scores for every size-`c` tuple, in lexicographic order.
#[derive(Clone, Debug)]
pub struct TupleScores {
    n: usize,
    c: usize,
    scores: Vec<f64>,
}

/// `C(n, k)` in floating point, saturating well past [`TUPLE_CAP`].
///
/// Multiplies before dividing: every prefix is itself a binomial coefficient,
/// so below 2^53 each step divides exactly and the result is an exact
/// integer. Tuple (un)ranking leans on that.
pub fn binomial_count(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0f64;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
        if acc > 1e18 {
            return acc;
        }
    }
    acc
}

impl TupleScores {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn c(&self) -> usize {
        self.c
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    /// The members of the tuple at `index` in lexicographic order.
    pub fn tuple(&self, index: usize) -> Vec<usize> {
        let mut members = Vec::with_capacity(self.c);
        let mut rank = index as f64;
        let mut next = 0;
        for remaining in (1..=self.c).rev() {
            // Advance `next` while skipping blocks of tuples that start lower.
            loop {
                let block = binomial_count(self.n - next - 1, remaining - 1);
                if rank < block {
                    break;
                }
                rank -= block;
                next += 1;
            }
            members.push(next);
            next += 1;
        }
        members
    }

    /// Lexicographic rank of a sorted member list.
    pub fn rank(&self, members: &[usize]) -> usize {
        let mut rank = 0.0;
        let mut start = 0;
        for (slot, &m) in members.iter().enumerate() {
            for v in start..m {
                rank += binomial_count(self.n - v - 1, self.c - slot - 1);
            }
            start = m + 1;
        }
        rank.round() as usize
    }

    pub fn score_of(&self, members: &[usize]) -> f64 {
        self.scores[self.rank(members)]
    }
}

/// Score every size-`c` subset of users by its per-position tallies.
///
/// `score(z, y, i)` receives the tuple tally, the pirate bit, and the
/// position. Refuses outright when `C(n, c)` exceeds [`TUPLE_CAP`].
pub fn tuple_scores(
    code: &Code,
    y: &PirateOutput,
    c: usize,
    score: impl Fn(usize, u8, usize) -> f64,
) -> Result<TupleScores> {
    if y.len() != code.ell() {
        return Err(Error::DimensionMismatch(format!(
            "pirate output has length {}, code has {}",
            y.len(),
            code.ell()
        )));
    }
    let n = code.n();
    if c == 0 || c > n {
        return Err(Error::DimensionMismatch(format!(
            "tuple size {c} outside 1..={n}"
        )));
    }
    let count = binomial_count(n, c);
    if count > TUPLE_CAP {
        return Err(Error::TupleCapExceeded {
            tuples: count,
            cap: TUPLE_CAP,
        });
    }

    let ell = code.ell();
    let ys = y.bits();
    let mut scores = Vec::with_capacity(count as usize);
    let mut tallies = vec![0u16; ell];
    // Walk combinations lexicographically, keeping the tally vector of the
    // current prefix so each step only adds/removes single rows.
    let mut members: Vec<usize> = Vec::with_capacity(c);
    fn add_row(tallies: &mut [u16], code: &Code, j: usize, sign: i32) {
        for (t, &b) in tallies.iter_mut().zip(code.row(j)) {
            *t = (*t as i32 + sign * b as i32) as u16;
        }
    }
    // Recursive enumeration without recursion: classic odometer.
    let mut next = 0usize;
    loop {
        if members.len() == c {
            let total: f64 = (0..ell)
                .map(|i| score(tallies[i] as usize, ys[i], i))
                .sum();
            scores.push(total);
            // Backtrack: pop until we can advance.
            loop {
                match members.pop() {
                    None => {
                        let tuples = TupleScores { n, c, scores };
                        debug_assert_eq!(tuples.len() as f64, count);
                        return Ok(tuples);
                    }
                    Some(last) => {
                        add_row(&mut tallies, code, last, -1);
                        let depth = members.len();
                        if last < n - (c - depth) {
                            next = last + 1;
                            break;
                        }
                    }
                }
            }
        } else {
            members.push(next);
            add_row(&mut tallies, code, next, 1);
            next += 1;
        }
    }
}

/// Normalize totals to the innocent scale:
/// `(S - ell * mu1) / sqrt(ell * var1)`.
pub fn normalize_scores(raw: &[f64], ell: u64, mu1: f64, var1: f64) -> Result<Vec<f64>> {
    if var1 <= 0.0 || var1.is_nan() {
        return Err(Error::NonPositiveVariance(var1));
    }
    let shift = ell as f64 * mu1;
    let scale = (ell as f64 * var1).sqrt();
    Ok(raw.iter().map(|s| (s - shift) / scale).collect())
}

/// The normalized-score threshold `Phi^-1(1 - eps1/n)`: under a standard
/// normal innocent profile, each of `n` users clears it with probability
/// `eps1/n`.
pub fn universal_threshold(n: u64, eps1: f64) -> Result<f64> {
    let tail = eps1 / n as f64;
    if !(tail > 0.0 && tail < 1.0) {
        return Err(Error::OutOfRange {
            what: "eps1/n",
            range: "(0, 1)",
            value: tail,
        });
    }
    let normal = Normal::standard();
    Ok(normal.inverse_cdf(1.0 - tail))
}

/// Outcome of thresholding per-user scores.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScoreReport {
    pub raw_scores: Vec<f64>,
    /// Present when accusation ran on the normalized scale.
    pub normalized_scores: Option<Vec<f64>>,
    /// The threshold actually compared against (raw or normalized scale).
    pub threshold: f64,
    /// Users with score `>= threshold`, ascending.
    pub accused: Vec<usize>,
}

/// Accuse every user whose raw total reaches `eta`. `-inf` never accuses.
pub fn accuse_simple(raw_scores: Vec<f64>, eta: f64) -> ScoreReport {
    let accused = raw_scores
        .iter()
        .enumerate()
        .filter(|(_, &s)| s >= eta)
        .map(|(j, _)| j)
        .collect();
    ScoreReport {
        raw_scores,
        normalized_scores: None,
        threshold: eta,
        accused,
    }
}

/// Accuse on the normalized scale instead.
pub fn accuse_normalized(raw_scores: Vec<f64>, normalized: Vec<f64>, eta: f64) -> ScoreReport {
    let accused = normalized
        .iter()
        .enumerate()
        .filter(|(_, &s)| s >= eta)
        .map(|(j, _)| j)
        .collect();
    ScoreReport {
        raw_scores,
        normalized_scores: Some(normalized),
        threshold: eta,
        accused,
    }
}

/// Joint accusation: every tuple at or above the threshold, plus the
/// distinguished top tuple.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct JointReport {
    pub threshold: f64,
    /// Member lists of all tuples scoring `>= threshold`, lexicographic.
    pub accused_tuples: Vec<Vec<usize>>,
    /// Highest-scoring tuple overall (ties resolved lexicographically),
    /// whether or not it clears the threshold.
    pub top_tuple: Vec<usize>,
    pub top_score: f64,
    /// Set when the accused tuples do not agree on a single membership, the
    /// regime where "accuse all members of accused tuples" stops being
    /// well-defined.
    pub ambiguous: bool,
}

pub fn accuse_joint(tuples: &TupleScores, eta: f64) -> JointReport {
    let mut accused_tuples = Vec::new();
    let mut top = 0usize;
    for (idx, &s) in tuples.scores().iter().enumerate() {
        if s >= eta {
            accused_tuples.push(tuples.tuple(idx));
        }
        // Strict comparison keeps the lexicographically first maximizer.
        if s > tuples.scores()[top] {
            top = idx;
        }
    }
    JointReport {
        threshold: eta,
        ambiguous: accused_tuples.len() > 1,
        top_tuple: tuples.tuple(top),
        top_score: tuples.scores()[top],
        accused_tuples,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{apply_channel, Attack};
    use crate::encoder::generate_code;
    use crate::model::CollusionChannel;
    use crate::probability::deterministic_balance_bias;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    const LN2: f64 = std::f64::consts::LN_2;

    fn model(attack: Attack, c: usize, p: f64) -> PositionModel {
        PositionModel::new(&attack.channel(c).unwrap(), p).unwrap()
    }

    #[test]
    fn all_one_llr_has_the_forbidden_cell() {
        let m = model(Attack::AllOne, 3, 0.2);
        assert_eq!(simple_llr(1, 0, &m), f64::NEG_INFINITY);
        assert!(simple_llr(1, 1, &m).is_finite());
    }

    #[test]
    fn identity_channel_llr() {
        let m = model(Attack::Interleaving, 1, 0.5);
        assert_relative_eq!(simple_llr(1, 1, &m), LN2, epsilon = 1e-12);
        assert_eq!(simple_llr(1, 0, &m), f64::NEG_INFINITY);
    }

    #[test]
    fn interleaving_g_closed_form_values() {
        assert_relative_eq!(interleaving_g(0, 1, 0.5, 2), 0.5f64.ln(), epsilon = 1e-12);
        assert_relative_eq!(interleaving_g(1, 1, 0.5, 2), 1.5f64.ln(), epsilon = 1e-12);
        assert_eq!(interleaving_g(0, 1, 0.5, 1), f64::NEG_INFINITY);
    }

    #[test]
    fn interleaving_g_matches_table_llr() {
        for c in [1usize, 2, 3, 10, 100] {
            for p in [0.05, 0.3, 0.5, 0.77, 0.95] {
                let m = model(Attack::Interleaving, c, p);
                for x in 0..2u8 {
                    for y in 0..2u8 {
                        let table = simple_llr(x, y, &m);
                        let closed = interleaving_g(x, y, p, c);
                        if table.is_finite() {
                            assert!(
                                (table - closed).abs() < 1e-12,
                                "c={c} p={p} ({x},{y}): {table} vs {closed}"
                            );
                        } else {
                            assert_eq!(table, closed);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn scaled_g_approaches_h() {
        // c * g ~ h for central biases; the gap is the second-order term
        // |h| / 2c.
        let c = 1000;
        for p in [0.35, 0.5, 0.65] {
            for (x, y) in [(0u8, 0u8), (0, 1), (1, 1)] {
                let g = interleaving_g(x, y, p, c);
                let h = oosterwijk_h(x, y, p);
                assert!(
                    ((c as f64 * g - h) / h).abs() < 1e-3,
                    "p={p} ({x},{y}): cg = {}, h = {h}",
                    c as f64 * g
                );
            }
        }
    }

    #[test]
    fn h_values() {
        assert_eq!(oosterwijk_h(0, 1, 0.3), -1.0);
        assert_eq!(oosterwijk_h(1, 1, 0.5), 1.0);
        assert_relative_eq!(oosterwijk_h(0, 0, 0.01), 1.0 / 99.0, epsilon = 1e-15);
    }

    #[test]
    fn emi_score_stays_finite_on_forbidden_cells() {
        let m = model(Attack::AllOne, 3, 0.2);
        let v = emi_bayes_m(1, 0, &m, 100);
        assert_relative_eq!(v, (1.0f64 - 0.03).ln(), epsilon = 1e-12);
    }

    #[test]
    fn emi_equals_llr_when_everyone_is_guilty() {
        let m = model(Attack::CoinFlip, 4, 0.4);
        for x in 0..2u8 {
            for y in 0..2u8 {
                let llr = simple_llr(x, y, &m);
                let emi = emi_bayes_m(x, y, &m, 4);
                if llr.is_finite() {
                    assert_relative_eq!(emi, llr, epsilon = 1e-12);
                } else {
                    assert_eq!(emi, f64::NEG_INFINITY);
                }
            }
        }
    }

    #[test]
    fn emi_interleaving_closed_form() {
        // Against interleaving the Bayes score collapses to the g-form with
        // c replaced by n.
        let n = 100u64;
        for c in [2usize, 5, 10] {
            for p in [0.2, 0.5, 0.8] {
                let m = model(Attack::Interleaving, c, p);
                let cases = [
                    (0u8, 0u8, (p / (n as f64 * (1.0 - p))).ln_1p()),
                    (0, 1, (-1.0 / n as f64).ln_1p()),
                    (1, 0, (-1.0 / n as f64).ln_1p()),
                    (1, 1, ((1.0 - p) / (n as f64 * p)).ln_1p()),
                ];
                for (x, y, want) in cases {
                    let got = emi_bayes_m(x, y, &m, n);
                    assert!(
                        (got - want).abs() < 1e-12,
                        "c={c} p={p} ({x},{y}): {got} vs {want}"
                    );
                }
            }
        }
        let m = model(Attack::Interleaving, 5, 0.5);
        assert_relative_eq!(
            emi_bayes_m(0, 1, &m, 100),
            0.99f64.ln(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn emi_approaches_llr_and_g_in_its_two_limits() {
        let c = 10;
        for p in [0.2, 0.5, 0.8] {
            let m = model(Attack::Interleaving, c, p);
            // c/n -> 1: m -> llr.
            for x in 0..2u8 {
                for y in 0..2u8 {
                    let m_val = emi_bayes_m(x, y, &m, 10);
                    assert_relative_eq!(m_val, simple_llr(x, y, &m), epsilon = 1e-12);
                }
            }
        }
        // n -> infinity with p central: n * m and c * g both collapse to the
        // h entries, so they agree once c is large as well.
        let c = 1000;
        let n = 1_000_000_000u64;
        for p in [0.2, 0.5, 0.8] {
            let m = model(Attack::Interleaving, c, p);
            for x in 0..2u8 {
                for y in 0..2u8 {
                    let lhs = n as f64 * emi_bayes_m(x, y, &m, n);
                    let rhs = c as f64 * interleaving_g(x, y, p, c);
                    assert!((lhs / rhs - 1.0).abs() < 5e-3, "({x},{y}) {lhs} vs {rhs}");
                }
            }
        }
    }

    #[test]
    fn joint_llr_deterministic_balance() {
        let ch = Attack::AllOne.channel(2).unwrap();
        let p = deterministic_balance_bias(&ch).unwrap();
        let m = PositionModel::new(&ch, p).unwrap();
        // Match scores ln 2, mismatch is impossible under H0.
        assert!((joint_llr(0, 0, &m) - LN2).abs() < 1e-9);
        assert!((joint_llr(1, 1, &m) - LN2).abs() < 1e-9);
        assert_eq!(joint_llr(0, 1, &m), f64::NEG_INFINITY);
        assert_eq!(joint_llr(2, 0, &m), f64::NEG_INFINITY);
    }

    #[test]
    fn joint_llr_interleaving_values() {
        let m = model(Attack::Interleaving, 4, 0.5);
        assert!((joint_llr(2, 1, &m) - 0.0).abs() < 1e-12);
        assert_relative_eq!(joint_llr(3, 1, &m), (0.75f64 / 0.5).ln(), epsilon = 1e-12);
        // Closed form agrees with the table on all tallies.
        for z in 0..=4 {
            for y in 0..2u8 {
                let closed = joint_interleaving_g(z, y, 0.5, 4);
                let table = joint_llr(z, y, &m);
                if table.is_finite() {
                    assert!((closed - table).abs() < 1e-12);
                } else {
                    assert_eq!(closed, table);
                }
            }
        }
    }

    #[test]
    fn likelihood_ratio_martingale() {
        // E_H1[exp(llr)] = 1 exactly, simple and joint.
        for attack in [Attack::Interleaving, Attack::CoinFlip, Attack::Dilution(0.4)] {
            let m = model(attack, 5, 0.3);
            let mut simple = 0.0;
            for x in 0..2u8 {
                for y in 0..2u8 {
                    let s = simple_llr(x, y, &m);
                    if s.is_finite() {
                        simple += m.simple_h1(x, y) * s.exp();
                    }
                }
            }
            assert_relative_eq!(simple, 1.0, epsilon = 1e-12);
            let mut joint = 0.0;
            for z in 0..=5 {
                for y in 0..2u8 {
                    let s = joint_llr(z, y, &m);
                    if s.is_finite() {
                        joint += m.joint_h1(z, y) * s.exp();
                    }
                }
            }
            assert_relative_eq!(joint, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn empty_code_scores_zero() {
        let code = Code::new(3, 0, vec![], vec![]).unwrap();
        let y = PirateOutput::new(vec![]).unwrap();
        let scores = user_scores(&code, &y, |_, _, _| 7.0).unwrap();
        assert_eq!(scores, vec![0.0; 3]);
    }

    #[test]
    fn constant_score_sums_to_ell() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let code = generate_code(4, &[0.5; 17], &mut rng).unwrap();
        let y = PirateOutput::new(vec![0; 17]).unwrap();
        let scores = user_scores(&code, &y, |_, _, _| 1.0).unwrap();
        assert!(scores.iter().all(|&s| s == 17.0));
        let bad = PirateOutput::new(vec![0; 16]).unwrap();
        assert!(user_scores(&code, &bad, |_, _, _| 1.0).is_err());
    }

    #[test]
    fn neg_infinity_absorbs() {
        let code = Code::new(1, 2, vec![1, 0], vec![0.5, 0.5]).unwrap();
        let y = PirateOutput::new(vec![0, 0]).unwrap();
        let scores = user_scores(&code, &y, |x, yb, _| {
            if x == 1 && yb == 0 {
                f64::NEG_INFINITY
            } else {
                5.0
            }
        })
        .unwrap();
        assert_eq!(scores[0], f64::NEG_INFINITY);
    }

    #[test]
    fn guilty_user_wins_under_identity_channel() {
        // c = 1: the single colluder's matched-LLR score beats every innocent
        // in nearly all trials once ell is large.
        let ch = CollusionChannel::new(vec![0.0, 1.0], 1).unwrap();
        let mut wins = 0;
        for trial in 0..100u64 {
            let mut rng = ChaCha12Rng::seed_from_u64(900 + trial);
            let code = generate_code(50, &[0.5; 500], &mut rng).unwrap();
            let y = apply_channel(&code, &[7], &ch, &mut rng).unwrap();
            let scores =
                user_scores(&code, &y, |x, yb, i| interleaving_g(x, yb, code.biases()[i], 1))
                    .unwrap();
            let best = scores
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .unwrap()
                .0;
            if best == 7 {
                wins += 1;
            }
        }
        assert!(wins >= 99, "guilty user won only {wins}/100 trials");
    }

    #[test]
    fn tuple_enumeration_order_and_ranks() {
        let code = Code::new(5, 1, vec![0, 0, 0, 0, 0], vec![0.5]).unwrap();
        let y = PirateOutput::new(vec![0]).unwrap();
        let t = tuple_scores(&code, &y, 3, |_, _, _| 0.0).unwrap();
        assert_eq!(t.len(), 10);
        assert_eq!(t.tuple(0), vec![0, 1, 2]);
        assert_eq!(t.tuple(1), vec![0, 1, 3]);
        assert_eq!(t.tuple(9), vec![2, 3, 4]);
        for idx in 0..10 {
            assert_eq!(t.rank(&t.tuple(idx)), idx);
        }
    }

    #[test]
    fn tuple_ranking_round_trips_at_scale() {
        // C(50, 4) = 230300 tuples; rank/unrank must stay exact throughout.
        let code = Code::new(50, 0, vec![], vec![]).unwrap();
        let y = PirateOutput::new(vec![]).unwrap();
        let t = tuple_scores(&code, &y, 4, |_, _, _| 0.0).unwrap();
        assert_eq!(t.len(), 230_300);
        assert_eq!(t.tuple(0), vec![0, 1, 2, 3]);
        assert_eq!(t.tuple(230_299), vec![46, 47, 48, 49]);
        for idx in [1usize, 999, 57_123, 115_150, 230_298] {
            assert_eq!(t.rank(&t.tuple(idx)), idx, "index {idx}");
        }
        assert_eq!(binomial_count(50, 4), 230_300.0);
        assert_eq!(binomial_count(30, 4), 27_405.0);
    }

    #[test]
    fn single_member_tuples_match_user_scores() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let code = generate_code(6, &[0.3; 25], &mut rng).unwrap();
        let ch = Attack::Interleaving.channel(1).unwrap();
        let y = apply_channel(&code, &[2], &ch, &mut rng).unwrap();
        let m = PositionModel::new(&ch, 0.3).unwrap();
        let users = user_scores(&code, &y, |x, yb, _| joint_llr(x as usize, yb, &m)).unwrap();
        let tuples = tuple_scores(&code, &y, 1, |z, yb, _| joint_llr(z, yb, &m)).unwrap();
        for (j, &a) in users.iter().enumerate() {
            let b = tuples.score_of(&[j]);
            if a.is_finite() {
                assert_relative_eq!(a, b, epsilon = 1e-12);
            } else {
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn all_guilty_tuple_scores_exactly_ell_ln2() {
        let ch = Attack::AllOne.channel(2).unwrap();
        let p = deterministic_balance_bias(&ch).unwrap();
        let m = PositionModel::new(&ch, p).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let code = generate_code(8, &vec![p; 40], &mut rng).unwrap();
        let coalition = [1usize, 5];
        let y = apply_channel(&code, &coalition, &ch, &mut rng).unwrap();
        let t = tuple_scores(&code, &y, 2, |z, yb, _| joint_llr(z, yb, &m)).unwrap();
        assert!((t.score_of(&coalition) - 40.0 * LN2).abs() < 1e-9);
    }

    #[test]
    fn joint_score_tracks_summed_member_scores_at_second_order() {
        // For tallies within two standard deviations of c/2 the per-position
        // joint interleaving score and the sum of member scores differ by
        // second-order terms: ~1/(2c) at the center, up to ~2.7/c at the band
        // edge where (z/c - p)^2 terms dominate. Bound by 4/c and check the
        // 1/c decay at the center.
        let gap = |c: usize, z: usize, y: u8, p: f64| -> f64 {
            let joint = joint_interleaving_g(z, y, p, c);
            let matches = if y == 1 { z } else { c - z };
            let summed = matches as f64
                * interleaving_g(y, y, p, c)
                + (c - matches) as f64 * interleaving_g(1 - y, y, p, c);
            (joint - summed).abs()
        };
        for c in [10usize, 40] {
            let band = (c as f64 / 4.0).sqrt();
            let lo = (c as f64 / 2.0 - 2.0 * band).ceil() as usize;
            let hi = (c as f64 / 2.0 + 2.0 * band).floor() as usize;
            for z in lo..=hi {
                for y in 0..2u8 {
                    assert!(
                        gap(c, z, y, 0.5) <= 4.0 / c as f64,
                        "c={c} z={z} y={y}: gap {}",
                        gap(c, z, y, 0.5)
                    );
                }
            }
        }
        // The center gap is c * |ln(1 - 1/c^2)| / 2 ~ 1/(2c).
        let center10 = gap(10, 5, 0, 0.5);
        let center40 = gap(40, 20, 0, 0.5);
        assert!((center10 * 20.0 - 1.0).abs() < 0.02, "{center10}");
        assert!(center40 < center10 / 3.0);
    }

    #[test]
    fn tuple_cap_refuses_large_enumerations() {
        let code = Code::new(200, 0, vec![], vec![]).unwrap();
        let y = PirateOutput::new(vec![]).unwrap();
        assert!(matches!(
            tuple_scores(&code, &y, 5, |_, _, _| 0.0),
            Err(Error::TupleCapExceeded { .. })
        ));
    }

    #[test]
    fn normalization_fixed_points() {
        let scores = vec![10.0, 10.0 + 20f64.sqrt(), f64::NEG_INFINITY];
        let normalized = normalize_scores(&scores, 20, 0.5, 1.0).unwrap();
        assert_relative_eq!(normalized[0], 0.0, epsilon = 1e-12);
        assert_relative_eq!(normalized[1], 1.0, epsilon = 1e-12);
        assert_eq!(normalized[2], f64::NEG_INFINITY);
        assert!(normalize_scores(&scores, 20, 0.5, 0.0).is_err());
    }

    #[test]
    fn universal_threshold_values() {
        assert!((universal_threshold(100, 0.05).unwrap() - 3.290526731491926).abs() < 1e-9);
        assert!(universal_threshold(2, 1.0).unwrap().abs() < 1e-12);
        let grow: Vec<f64> = [100u64, 1000, 10_000]
            .iter()
            .map(|&n| universal_threshold(n, 0.05).unwrap())
            .collect();
        assert!(grow[0] < grow[1] && grow[1] < grow[2]);
        assert!(universal_threshold(1, 1.0).is_err());
    }

    #[test]
    fn empty_accusation_below_threshold() {
        let report = accuse_simple(vec![1.0, 2.0, f64::NEG_INFINITY], 2.5);
        assert!(report.accused.is_empty());
        let report = accuse_simple(vec![1.0, 3.0], 2.5);
        assert_eq!(report.accused, vec![1]);
    }

    #[test]
    fn raising_the_threshold_never_accuses_more() {
        let scores: Vec<f64> = (0..50).map(|k| (k as f64 * 0.7).sin() * 3.0).collect();
        let mut previous = usize::MAX;
        for eta in [-2.0, -1.0, 0.0, 1.0, 2.0] {
            let got = accuse_simple(scores.clone(), eta).accused.len();
            assert!(got <= previous);
            previous = got;
        }
    }

    #[test]
    fn joint_ambiguity_flag() {
        let t = TupleScores {
            n: 4,
            c: 2,
            scores: vec![5.0, 0.0, 0.0, 0.0, 0.0, 5.0], // {0,1} and {2,3}
        };
        let report = accuse_joint(&t, 4.0);
        assert_eq!(report.accused_tuples, vec![vec![0, 1], vec![2, 3]]);
        assert!(report.ambiguous);
        assert_eq!(report.top_tuple, vec![0, 1]); // lexicographic tie-break
        let quiet = accuse_joint(&t, 6.0);
        assert!(quiet.accused_tuples.is_empty());
        assert!(!quiet.ambiguous);
    }
}
