//! Monte Carlo harness: end-to-end trials (encode, collude, decode, accuse),
//! error-rate estimation with Wilson intervals, and score-distribution
//! histograms.
//!
//! Reproducibility contract: `(config, seed)` fully determines every output.
//! Each trial draws from its own counter-indexed stream, so results do not
//! depend on how trials are scheduled across threads.

use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::{apply_channel, Attack};
use crate::decoders::{
    accuse_joint, accuse_normalized, accuse_simple, binomial_count, emi_bayes_m, interleaving_g,
    joint_interleaving_g, joint_llr, oosterwijk_h, simple_llr, tuple_scores, user_scores,
    ScoreReport, TUPLE_CAP,
};
use crate::encoder::{generate_code, sample_biases};
use crate::error::{Error, Result};
use crate::model::{BiasDistribution, CollusionChannel, SchemeParams};
use crate::probability::{score_moments, Mode, PositionModel};
use crate::rng::trial_rng;
use crate::stats::{sample_moments, wilson_interval, SampleMoments};

/// Stream index reserved for the shared code when `reuse_code` is on.
const CODE_STREAM: u64 = u64::MAX;

/// Which score function a run uses. The first four are simple (per-user)
/// decoders, the last two are joint (per-tuple) decoders.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Decoder {
    /// Log-likelihood ratio matched to the configured channel (informed).
    Llr,
    /// The universal interleaving decoder `g`.
    InterleavingG,
    /// The `h` comparison score.
    OosterwijkH,
    /// Bayesian empirical-mutual-information score `m` (informed).
    EmiM,
    /// Joint log-likelihood ratio matched to the channel (informed).
    JointLlr,
    /// The joint interleaving decoder.
    JointInterleaving,
}

impl Decoder {
    pub fn is_joint(&self) -> bool {
        matches!(self, Decoder::JointLlr | Decoder::JointInterleaving)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Decoder::Llr => "llr",
            Decoder::InterleavingG => "interleaving-g",
            Decoder::OosterwijkH => "oosterwijk-h",
            Decoder::EmiM => "emi-m",
            Decoder::JointLlr => "joint-llr",
            Decoder::JointInterleaving => "joint-interleaving",
        }
    }
}

impl std::str::FromStr for Decoder {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "llr" => Ok(Decoder::Llr),
            "interleaving-g" => Ok(Decoder::InterleavingG),
            "oosterwijk-h" => Ok(Decoder::OosterwijkH),
            "emi-m" => Ok(Decoder::EmiM),
            "joint-llr" => Ok(Decoder::JointLlr),
            "joint-interleaving" => Ok(Decoder::JointInterleaving),
            _ => Err(Error::InvalidConfig(format!("unknown decoder `{s}`"))),
        }
    }
}

impl std::fmt::Display for Decoder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// The channel the simulated coalition plays: a named attack or an explicit
/// probability vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AttackSpec {
    Named(Attack),
    Explicit(CollusionChannel),
}

impl AttackSpec {
    pub fn channel(&self, c: usize) -> Result<CollusionChannel> {
        match self {
            AttackSpec::Named(a) => a.channel(c),
            AttackSpec::Explicit(ch) => {
                if ch.c() != c {
                    return Err(Error::InvalidConfig(format!(
                        "explicit channel is for c = {}, config says c = {}",
                        ch.c(),
                        c
                    )));
                }
                Ok(ch.clone())
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            AttackSpec::Named(a) => a.to_string(),
            AttackSpec::Explicit(_) => "explicit".into(),
        }
    }
}

impl From<Attack> for AttackSpec {
    fn from(a: Attack) -> Self {
        AttackSpec::Named(a)
    }
}

/// How scores are prepared before the threshold is applied.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Threshold the raw totals (the informed constructions).
    #[default]
    None,
    /// Shift/scale by the exact innocent moments of the realized bias vector
    /// (requires the channel to be known, as it is inside a simulation).
    Exact,
    /// Estimate the innocent moments from the observed scores themselves; the
    /// deployable choice when nothing about the attack is known. With
    /// `c << n` the guilty contamination of the estimates is negligible.
    Sample,
}

/// A full experiment description; serializable so runs can be scripted.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub n: usize,
    pub c: usize,
    pub attack: AttackSpec,
    pub bias: BiasDistribution,
    pub decoder: Decoder,
    pub mode: Mode,
    /// Code length (positions per trial).
    pub ell: u64,
    /// Accusation threshold, on the scale selected by `normalization`.
    pub eta: f64,
    #[serde(default)]
    pub normalization: Normalization,
    pub trials: u64,
    pub seed: u64,
    /// Reuse one code across all trials (variance-reduction studies only);
    /// fresh code per trial is the default game.
    #[serde(default)]
    pub reuse_code: bool,
}

impl ExperimentConfig {
    /// Adopt `(ell, eta)` from a calculator output.
    pub fn with_params(mut self, params: &SchemeParams) -> Self {
        self.ell = params.ell;
        self.eta = params.eta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials < 1 {
            return Err(Error::InvalidConfig("trials must be >= 1".into()));
        }
        if self.c < 1 || self.c > self.n {
            return Err(Error::InvalidConfig(format!(
                "need 1 <= c <= n, got c = {}, n = {}",
                self.c, self.n
            )));
        }
        if self.decoder.is_joint() != (self.mode == Mode::Joint) {
            return Err(Error::InvalidConfig(format!(
                "decoder `{}` does not fit {} mode",
                self.decoder, self.mode
            )));
        }
        if self.mode == Mode::Joint {
            if self.normalization != Normalization::None {
                return Err(Error::InvalidConfig(
                    "score normalization is defined for simple decoding only".into(),
                ));
            }
            let count = binomial_count(self.n, self.c);
            if count > TUPLE_CAP {
                return Err(Error::TupleCapExceeded {
                    tuples: count,
                    cap: TUPLE_CAP,
                });
            }
        }
        if !self.eta.is_finite() {
            return Err(Error::InvalidConfig("eta must be finite".into()));
        }
        self.attack.channel(self.c).map(|_| ())
    }
}

/// Raw-score summary for one class of users (or tuples) in one trial.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub count: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

fn summarize(scores: impl Iterator<Item = f64> + Clone) -> ScoreSummary {
    let count = scores.clone().count();
    if count == 0 {
        return ScoreSummary {
            count,
            mean: f64::NAN,
            min: f64::NAN,
            max: f64::NAN,
        };
    }
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    let mut sum = 0.0;
    for s in scores {
        min = min.min(s);
        max = max.max(s);
        sum += s;
    }
    ScoreSummary {
        count,
        mean: sum / count as f64,
        min,
        max,
    }
}

/// Joint-mode accusation facts for one trial.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct JointOutcome {
    pub all_guilty_accused: bool,
    pub all_guilty_score: f64,
    /// Some accused tuple contains no colluder at all.
    pub any_all_innocent_accused: bool,
    /// Some accused tuple mixes colluders and innocents (behaviour the
    /// provable bounds do not cover; measured, never asserted).
    pub any_mixed_accused: bool,
    /// Exactly one tuple cleared the threshold and it was the coalition: the
    /// pessimistic success criterion.
    pub only_all_guilty_accused: bool,
    pub top_is_all_guilty: bool,
    pub ambiguous: bool,
}

/// Everything one trial produced.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub coalition: Vec<usize>,
    /// Accused users; in joint mode the union of accused tuples' members.
    pub accused: Vec<usize>,
    /// Simple mode: some accused user is innocent. Joint mode: some accused
    /// tuple is all-innocent (the event the eps1 guarantee bounds).
    pub any_innocent_accused: bool,
    /// At least one colluder appears among the accused.
    pub caught_any: bool,
    /// Simple mode: every colluder accused. Joint mode: the all-guilty tuple
    /// was accused.
    pub caught_all: bool,
    pub innocent_scores: ScoreSummary,
    pub guilty_scores: ScoreSummary,
    /// Per-user normalized scores when normalization ran (simple mode).
    pub normalized_scores: Option<Vec<f64>>,
    pub joint: Option<JointOutcome>,
}

/// Per-position score tables: `table[i][x or z][y]`.
enum Tables {
    Simple(Vec<[[f64; 2]; 2]>),
    Joint(Vec<Vec<[f64; 2]>>),
}

/// Models per position; fixed-bias runs share one model across positions.
enum Models {
    Shared(PositionModel),
    PerPosition(Vec<PositionModel>),
}

impl Models {
    fn build(channel: &CollusionChannel, bias: &BiasDistribution, biases: &[f64]) -> Result<Models> {
        Ok(match bias {
            BiasDistribution::FixedP(p) => Models::Shared(PositionModel::new(channel, *p)?),
            BiasDistribution::Arcsine { .. } => Models::PerPosition(
                biases
                    .iter()
                    .map(|&p| PositionModel::new(channel, p))
                    .collect::<Result<_>>()?,
            ),
        })
    }

    fn at(&self, i: usize) -> &PositionModel {
        match self {
            Models::Shared(m) => m,
            Models::PerPosition(v) => &v[i],
        }
    }
}

/// Score tables plus, when exact normalization asked for them, the summed
/// innocent moments `(sum mu1_i, sum var1_i)` of the realized bias vector.
fn build_tables(
    config: &ExperimentConfig,
    channel: &CollusionChannel,
    biases: &[f64],
) -> Result<(Tables, Option<(f64, f64)>)> {
    let c = config.c;
    let needs_model = matches!(
        config.decoder,
        Decoder::Llr | Decoder::EmiM | Decoder::JointLlr
    ) || config.normalization == Normalization::Exact;
    let models = if needs_model {
        Some(Models::build(channel, &config.bias, biases)?)
    } else {
        None
    };

    if config.decoder.is_joint() {
        let tables = (0..biases.len())
            .map(|i| {
                (0..=c)
                    .map(|z| match config.decoder {
                        Decoder::JointLlr => {
                            let m = models.as_ref().unwrap().at(i);
                            [joint_llr(z, 0, m), joint_llr(z, 1, m)]
                        }
                        Decoder::JointInterleaving => [
                            joint_interleaving_g(z, 0, biases[i], c),
                            joint_interleaving_g(z, 1, biases[i], c),
                        ],
                        _ => unreachable!(),
                    })
                    .collect()
            })
            .collect();
        return Ok((Tables::Joint(tables), None));
    }

    let table_at = |i: usize| -> [[f64; 2]; 2] {
        let mut t = [[0.0; 2]; 2];
        for x in 0..2u8 {
            for y in 0..2u8 {
                t[x as usize][y as usize] = match config.decoder {
                    Decoder::Llr => simple_llr(x, y, models.as_ref().unwrap().at(i)),
                    Decoder::EmiM => {
                        emi_bayes_m(x, y, models.as_ref().unwrap().at(i), config.n as u64)
                    }
                    Decoder::InterleavingG => interleaving_g(x, y, biases[i], c),
                    Decoder::OosterwijkH => oosterwijk_h(x, y, biases[i]),
                    _ => unreachable!(),
                };
            }
        }
        t
    };
    let tables: Vec<[[f64; 2]; 2]> = (0..biases.len()).map(table_at).collect();

    let moments = if config.normalization == Normalization::Exact {
        let models = models.as_ref().unwrap();
        let mut mu = 0.0;
        let mut var = 0.0;
        for (i, t) in tables.iter().enumerate() {
            let sm = score_moments(models.at(i), Mode::Simple, |x, y| t[x][y as usize]);
            mu += sm.mu1;
            var += sm.var1;
        }
        if !(mu.is_finite() && var.is_finite()) {
            return Err(Error::InvalidConfig(
                "exact normalization is undefined: innocent score moments diverge \
                 for this decoder under this channel"
                    .into(),
            ));
        }
        Some((mu, var))
    } else {
        None
    };
    Ok((Tables::Simple(tables), moments))
}

/// Play one round of the game: draw a coalition, generate a code, run the
/// channel, score, and accuse.
pub fn run_trial(config: &ExperimentConfig, rng: &mut ChaCha12Rng) -> Result<TrialOutcome> {
    config.validate()?;
    let channel = config.attack.channel(config.c)?;
    let ell = config.ell as usize;

    let mut coalition = rand::seq::index::sample(rng, config.n, config.c).into_vec();
    coalition.sort_unstable();

    let code = if config.reuse_code {
        let mut code_rng = trial_rng(config.seed, CODE_STREAM);
        let biases = sample_biases(&config.bias, ell, &mut code_rng);
        generate_code(config.n, &biases, &mut code_rng)?
    } else {
        let biases = sample_biases(&config.bias, ell, rng);
        generate_code(config.n, &biases, rng)?
    };
    let y = apply_channel(&code, &coalition, &channel, rng)?;

    let is_guilty = |j: usize| coalition.binary_search(&j).is_ok();
    let (tables, exact_moments) = build_tables(config, &channel, code.biases())?;

    match tables {
        Tables::Simple(tables) => {
            let raw = user_scores(&code, &y, |x, yb, i| tables[i][x as usize][yb as usize])?;
            let report: ScoreReport = match config.normalization {
                Normalization::None => accuse_simple(raw, config.eta),
                Normalization::Exact => {
                    let (mu_sum, var_sum) =
                        exact_moments.expect("moments computed with the tables");
                    let lf = ell as f64;
                    let normalized =
                        crate::decoders::normalize_scores(&raw, config.ell, mu_sum / lf, var_sum / lf)?;
                    accuse_normalized(raw, normalized, config.eta)
                }
                Normalization::Sample => {
                    let finite: Vec<f64> = raw.iter().copied().filter(|s| s.is_finite()).collect();
                    if finite.len() < 2 {
                        return Err(Error::InvalidConfig(
                            "sample normalization needs at least two finite scores".into(),
                        ));
                    }
                    let m = sample_moments(&finite);
                    let lf = ell as f64;
                    let normalized = crate::decoders::normalize_scores(
                        &raw,
                        config.ell,
                        m.mean / lf,
                        m.variance / lf,
                    )?;
                    accuse_normalized(raw, normalized, config.eta)
                }
            };

            let any_innocent_accused = report.accused.iter().any(|&j| !is_guilty(j));
            let caught: Vec<bool> = coalition
                .iter()
                .map(|&j| report.accused.binary_search(&j).is_ok())
                .collect();
            let innocent_scores = summarize(
                report
                    .raw_scores
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| !is_guilty(*j))
                    .map(|(_, &s)| s),
            );
            let guilty_scores = summarize(coalition.iter().map(|&j| report.raw_scores[j]));
            Ok(TrialOutcome {
                any_innocent_accused,
                caught_any: caught.iter().any(|&b| b),
                caught_all: caught.iter().all(|&b| b),
                innocent_scores,
                guilty_scores,
                normalized_scores: report.normalized_scores,
                accused: report.accused,
                coalition,
                joint: None,
            })
        }
        Tables::Joint(tables) => {
            let scores = tuple_scores(&code, &y, config.c, |z, yb, i| tables[i][z][yb as usize])?;
            let report = accuse_joint(&scores, config.eta);

            let classify = |members: &[usize]| -> usize {
                members.iter().filter(|&&j| is_guilty(j)).count()
            };
            let mut any_all_innocent = false;
            let mut any_mixed = false;
            let mut caught_any = false;
            let mut accused_users: Vec<usize> = Vec::new();
            for tuple in &report.accused_tuples {
                let guilty = classify(tuple);
                if guilty == 0 {
                    any_all_innocent = true;
                } else {
                    caught_any = true;
                    if guilty < config.c {
                        any_mixed = true;
                    }
                }
                accused_users.extend(tuple.iter().copied());
            }
            accused_users.sort_unstable();
            accused_users.dedup();

            let all_guilty_score = scores.score_of(&coalition);
            let all_guilty_accused = all_guilty_score >= config.eta;
            let only_all_guilty = all_guilty_accused && report.accused_tuples.len() == 1;
            let top_is_all_guilty = report.top_tuple == coalition;
            let innocent_scores = summarize(
                scores
                    .scores()
                    .iter()
                    .enumerate()
                    .filter(|(idx, _)| classify(&scores.tuple(*idx)) == 0)
                    .map(|(_, &s)| s),
            );
            let guilty_scores = summarize(std::iter::once(all_guilty_score));

            Ok(TrialOutcome {
                any_innocent_accused: any_all_innocent,
                caught_any,
                caught_all: all_guilty_accused,
                innocent_scores,
                guilty_scores,
                normalized_scores: None,
                accused: accused_users,
                coalition,
                joint: Some(JointOutcome {
                    all_guilty_accused,
                    all_guilty_score,
                    any_all_innocent_accused: any_all_innocent,
                    any_mixed_accused: any_mixed,
                    only_all_guilty_accused: only_all_guilty,
                    top_is_all_guilty,
                    ambiguous: report.ambiguous,
                }),
            })
        }
    }
}

/// A rate with its Wilson 95% interval.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct RateEstimate {
    pub events: u64,
    pub rate: f64,
    pub lower95: f64,
    pub upper95: f64,
}

impl RateEstimate {
    fn from_events(events: u64, trials: u64) -> Self {
        let (lower95, upper95) = wilson_interval(events, trials);
        RateEstimate {
            events,
            rate: events as f64 / trials as f64,
            lower95,
            upper95,
        }
    }
}

/// Joint-mode rates beyond the generic three.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct JointRates {
    pub all_guilty_accused: RateEstimate,
    pub any_all_innocent_accused: RateEstimate,
    pub any_mixed_accused: RateEstimate,
    /// The pessimistic success criterion: the coalition cleared the threshold
    /// and nothing else did.
    pub only_all_guilty_accused: RateEstimate,
    /// The richer decoding rule "accuse the members of the highest-scoring
    /// tuple" succeeding; reported separately, never asserted.
    pub top_tuple_is_coalition: RateEstimate,
    pub ambiguous: RateEstimate,
}

/// Aggregated error rates over all trials.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ErrorEstimate {
    pub trials: u64,
    /// Any innocent accused (simple) / any all-innocent tuple accused (joint).
    pub fp: RateEstimate,
    /// No colluder accused.
    pub fn_catch_one: RateEstimate,
    /// Some colluder missed.
    pub fn_catch_all: RateEstimate,
    pub joint: Option<JointRates>,
}

/// Run all trials on independent streams (in parallel) and aggregate.
pub fn estimate_errors(config: &ExperimentConfig) -> Result<ErrorEstimate> {
    config.validate()?;
    let outcomes: Vec<TrialOutcome> = (0..config.trials)
        .into_par_iter()
        .map(|t| run_trial(config, &mut trial_rng(config.seed, t)))
        .collect::<Result<_>>()?;
    let trials = config.trials;
    let count = |f: &dyn Fn(&TrialOutcome) -> bool| outcomes.iter().filter(|o| f(o)).count() as u64;

    let joint = if config.mode == Mode::Joint {
        let jcount = |f: &dyn Fn(&JointOutcome) -> bool| {
            outcomes
                .iter()
                .filter(|o| f(o.joint.as_ref().unwrap()))
                .count() as u64
        };
        Some(JointRates {
            all_guilty_accused: RateEstimate::from_events(jcount(&|j| j.all_guilty_accused), trials),
            any_all_innocent_accused: RateEstimate::from_events(
                jcount(&|j| j.any_all_innocent_accused),
                trials,
            ),
            any_mixed_accused: RateEstimate::from_events(jcount(&|j| j.any_mixed_accused), trials),
            only_all_guilty_accused: RateEstimate::from_events(
                jcount(&|j| j.only_all_guilty_accused),
                trials,
            ),
            top_tuple_is_coalition: RateEstimate::from_events(
                jcount(&|j| j.top_is_all_guilty),
                trials,
            ),
            ambiguous: RateEstimate::from_events(jcount(&|j| j.ambiguous), trials),
        })
    } else {
        None
    };

    Ok(ErrorEstimate {
        trials,
        fp: RateEstimate::from_events(count(&|o| o.any_innocent_accused), trials),
        fn_catch_one: RateEstimate::from_events(count(&|o| !o.caught_any), trials),
        fn_catch_all: RateEstimate::from_events(count(&|o| !o.caught_all), trials),
        joint,
    })
}

/// Binned density of pooled normalized innocent scores, with the standard
/// normal overlay.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScoreHistogram {
    pub bins: usize,
    pub lo: f64,
    pub hi: f64,
    pub bin_centers: Vec<f64>,
    /// Empirical density (normalized by the full pooled count, so mass that
    /// fell outside the range is visible as a deficit).
    pub density: Vec<f64>,
    /// Standard normal pdf at the bin centers.
    pub reference: Vec<f64>,
    /// Fraction of pooled scores outside `[lo, hi]`.
    pub tail_mass: f64,
    /// Moments of the full pooled sample (tails included).
    pub moments: SampleMoments,
    pub pooled: usize,
}

/// Histogram over a fixed range; returns `(centers, density, tail_mass)`.
pub fn histogram_density(scores: &[f64], bins: usize, lo: f64, hi: f64) -> (Vec<f64>, Vec<f64>, f64) {
    assert!(bins >= 1 && hi > lo);
    let width = (hi - lo) / bins as f64;
    let centers: Vec<f64> = (0..bins).map(|b| lo + (b as f64 + 0.5) * width).collect();
    let mut counts = vec![0usize; bins];
    let mut outside = 0usize;
    for &s in scores {
        if s < lo || s >= hi {
            outside += 1;
        } else {
            counts[((s - lo) / width) as usize] += 1;
        }
    }
    let total = scores.len() as f64;
    let density = counts
        .iter()
        .map(|&k| k as f64 / (total * width))
        .collect();
    (centers, density, outside as f64 / total)
}

/// Pool normalized innocent scores across trials (simple mode) and bin them.
///
/// Runs take `Exact` or `Sample` normalization; the attack is known inside a
/// simulation, so `Exact` is the faithful reading of the reference curves.
pub fn score_histogram(config: &ExperimentConfig, bins: usize) -> Result<ScoreHistogram> {
    if config.mode != Mode::Simple {
        return Err(Error::InvalidConfig(
            "score histograms are defined for simple decoding".into(),
        ));
    }
    if config.normalization == Normalization::None {
        return Err(Error::InvalidConfig(
            "score histograms need exact or sample normalization".into(),
        ));
    }
    if bins < 1 {
        return Err(Error::InvalidConfig("bins must be >= 1".into()));
    }
    config.validate()?;

    let pooled: Vec<f64> = (0..config.trials)
        .into_par_iter()
        .map(|t| -> Result<Vec<f64>> {
            let outcome = run_trial(config, &mut trial_rng(config.seed, t))?;
            let normalized = outcome
                .normalized_scores
                .expect("normalization ran in simple mode");
            Ok(normalized
                .iter()
                .enumerate()
                .filter(|(j, _)| outcome.coalition.binary_search(j).is_err())
                .map(|(_, &s)| s)
                .collect())
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();

    const LO: f64 = -6.0;
    const HI: f64 = 6.0;
    let (bin_centers, density, tail_mass) = histogram_density(&pooled, bins, LO, HI);
    let norm = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    let reference = bin_centers
        .iter()
        .map(|&x| norm * (-0.5 * x * x).exp())
        .collect();
    Ok(ScoreHistogram {
        bins,
        lo: LO,
        hi: HI,
        bin_centers,
        density,
        reference,
        tail_mass,
        moments: sample_moments(&pooled),
        pooled: pooled.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{deterministic_joint_params, simple_params};
    use crate::probability::{deterministic_balance_bias, optimal_bias};

    fn informed_simple_config() -> ExperimentConfig {
        let ch = Attack::AllOne.channel(3).unwrap();
        let p = optimal_bias(&ch, Mode::Simple);
        let model = PositionModel::new(&ch, p).unwrap();
        let params = simple_params(40, 0.2, 0.2, &model).unwrap();
        ExperimentConfig {
            n: 40,
            c: 3,
            attack: Attack::AllOne.into(),
            bias: BiasDistribution::fixed(p).unwrap(),
            decoder: Decoder::Llr,
            mode: Mode::Simple,
            ell: params.ell,
            eta: params.eta,
            normalization: Normalization::None,
            trials: 40,
            seed: 7,
            reuse_code: false,
        }
    }

    #[test]
    fn trials_are_deterministic() {
        let config = informed_simple_config();
        let a = run_trial(&config, &mut trial_rng(config.seed, 0)).unwrap();
        let b = run_trial(&config, &mut trial_rng(config.seed, 0)).unwrap();
        assert_eq!(a.coalition, b.coalition);
        assert_eq!(a.accused, b.accused);
        assert_eq!(a.guilty_scores.mean, b.guilty_scores.mean);
    }

    #[test]
    fn estimates_are_reproducible_and_sane() {
        let config = informed_simple_config();
        let e1 = estimate_errors(&config).unwrap();
        let e2 = estimate_errors(&config).unwrap();
        assert_eq!(e1.fp.events, e2.fp.events);
        assert_eq!(e1.fn_catch_one.events, e2.fn_catch_one.events);
        assert!(e1.fn_catch_one.rate <= e1.fn_catch_all.rate);
        assert!(e1.fp.lower95 <= e1.fp.rate && e1.fp.rate <= e1.fp.upper95);
    }

    #[test]
    fn whole_population_coalition_cannot_false_positive() {
        let mut config = informed_simple_config();
        config.n = 3;
        config.c = 3;
        config.trials = 10;
        let est = estimate_errors(&config).unwrap();
        assert_eq!(est.fp.events, 0);
    }

    #[test]
    fn single_trial_rates_are_zero_or_one() {
        let mut config = informed_simple_config();
        config.trials = 1;
        let est = estimate_errors(&config).unwrap();
        for rate in [est.fp.rate, est.fn_catch_one.rate, est.fn_catch_all.rate] {
            assert!(rate == 0.0 || rate == 1.0);
        }
    }

    #[test]
    fn certain_catch_configuration_always_accuses_the_coalition() {
        let ch = Attack::AllOne.channel(2).unwrap();
        let p = deterministic_balance_bias(&ch).unwrap();
        let params = deterministic_joint_params(2, 12, 0.05).unwrap();
        let config = ExperimentConfig {
            n: 12,
            c: 2,
            attack: Attack::AllOne.into(),
            bias: BiasDistribution::fixed(p).unwrap(),
            decoder: Decoder::JointLlr,
            mode: Mode::Joint,
            ell: params.ell,
            eta: params.eta,
            normalization: Normalization::None,
            trials: 25,
            seed: 11,
            reuse_code: false,
        };
        let outcome = run_trial(&config, &mut trial_rng(config.seed, 0)).unwrap();
        let joint = outcome.joint.unwrap();
        assert!(joint.all_guilty_accused);
        let est = estimate_errors(&config).unwrap();
        assert_eq!(est.joint.unwrap().all_guilty_accused.rate, 1.0);
        assert_eq!(est.fn_catch_one.events, 0);
    }

    #[test]
    fn disjoint_seed_ranges_agree_within_intervals() {
        let mut config = informed_simple_config();
        config.trials = 120;
        config.eta *= 0.5; // push rates away from 0 so the check has teeth
        let a = estimate_errors(&config).unwrap();
        config.seed = 7777;
        let b = estimate_errors(&config).unwrap();
        assert!(
            a.fp.lower95 <= b.fp.upper95 && b.fp.lower95 <= a.fp.upper95,
            "disjoint streams disagree: {:?} vs {:?}",
            a.fp,
            b.fp
        );
    }

    #[test]
    fn reused_code_is_shared_across_trials() {
        let mut config = informed_simple_config();
        config.reuse_code = true;
        config.bias = BiasDistribution::arcsine(0.0).unwrap();
        config.decoder = Decoder::InterleavingG;
        config.normalization = Normalization::Sample;
        config.eta = 3.0;
        // Same coalition positions differ, but the innocent score pattern
        // comes from one fixed code: check by rerunning trial 0 and 1 and
        // confirming the bias vectors agree (scores of a never-guilty user
        // under identical y would be equal; cheapest observable: determinism
        // plus distinct coalitions).
        let a = run_trial(&config, &mut trial_rng(config.seed, 0)).unwrap();
        let b = run_trial(&config, &mut trial_rng(config.seed, 1)).unwrap();
        assert_ne!(a.coalition, b.coalition);
        let a2 = run_trial(&config, &mut trial_rng(config.seed, 0)).unwrap();
        assert_eq!(a.accused, a2.accused);
    }

    #[test]
    fn histogram_of_identical_scores_occupies_one_bin() {
        let (_, density, tail) = histogram_density(&[0.42; 1000], 60, -6.0, 6.0);
        assert_eq!(density.iter().filter(|&&d| d > 0.0).count(), 1);
        assert_eq!(tail, 0.0);
    }

    #[test]
    fn histogram_runs_and_reference_integrates_to_one() {
        let config = ExperimentConfig {
            n: 25,
            c: 3,
            attack: Attack::Interleaving.into(),
            bias: BiasDistribution::arcsine(0.0).unwrap(),
            decoder: Decoder::InterleavingG,
            mode: Mode::Simple,
            ell: 400,
            eta: 4.0,
            normalization: Normalization::Exact,
            trials: 10,
            seed: 5,
            reuse_code: false,
        };
        let hist = score_histogram(&config, 80).unwrap();
        assert_eq!(hist.density.len(), 80);
        assert_eq!(hist.pooled, 10 * 22);
        let width = (hist.hi - hist.lo) / 80.0;
        let reference_mass: f64 = hist.reference.iter().map(|d| d * width).sum();
        assert!((reference_mass - 1.0).abs() < 0.01);
        let empirical_mass: f64 = hist.density.iter().map(|d| d * width).sum();
        assert!((empirical_mass + hist.tail_mass - 1.0).abs() < 1e-9);
        // Normalized innocents should look roughly standard.
        assert!(hist.moments.mean.abs() < 0.2);
        assert!((hist.moments.variance - 1.0).abs() < 0.3);
    }

    #[test]
    fn config_validation_catches_mismatches() {
        let mut config = informed_simple_config();
        config.trials = 0;
        assert!(config.validate().is_err());
        let mut config = informed_simple_config();
        config.decoder = Decoder::JointLlr;
        assert!(config.validate().is_err());
        let mut config = informed_simple_config();
        config.c = 50;
        assert!(config.validate().is_err());
    }

    #[test]
    fn config_serde_round_trip() {
        let config = informed_simple_config();
        let json = serde_json::to_string(&config).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back.n, config.n);
        assert_eq!(back.attack, config.attack);
        assert_eq!(back.decoder, config.decoder);
        assert_eq!(back.normalization, config.normalization);
    }
}
