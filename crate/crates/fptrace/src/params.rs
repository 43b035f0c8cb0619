//! Scheme-parameter calculators: code length `ell` and threshold `eta` from
//! the Chernoff-style moment bounds, the certain-catch construction for
//! deterministic channels, the catch-all heuristic, published leading-order
//! asymptotics, and the universal (attack-agnostic) design.

use crate::channels::Attack;
use crate::decoders::universal_threshold;
use crate::error::{Error, Result};
use crate::model::SchemeParams;
use crate::probability::{moment_fn, Mode, PositionModel};

const LN2: f64 = std::f64::consts::LN_2;

fn check_eps(eps1: f64, eps2: f64) -> Result<()> {
    for (what, e) in [("eps1", eps1), ("eps2", eps2)] {
        if !(e > 0.0 && e < 1.0) {
            return Err(Error::OutOfRange {
                what: if what == "eps1" { "eps1" } else { "eps2" },
                range: "(0, 1)",
                value: e,
            });
        }
    }
    Ok(())
}

/// Shared core: given the log-budget `base` (`ln(n/eps1)` or its joint
/// analogue) and an exponent split `gamma`, solve the two Chernoff bounds for
/// `(ell, eta)`:
///
/// ```text
/// ell = sqrt(g) (1 + sqrt(g) - g) / (-ln M(1 - sqrt(g))) * base
/// eta = (1 - g) * base
/// ```
///
/// `ell` is ceiled (the bounds are monotone in `ell`), `eta` stays real.
fn params_for_gamma(
    model: &PositionModel,
    mode: Mode,
    base: f64,
    gamma: f64,
    eps1: f64,
    eps2: f64,
) -> Result<SchemeParams> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::IncompatibleBudgets { gamma });
    }
    let s = gamma.sqrt();
    let m = moment_fn(model, 1.0 - s, mode)?;
    if m >= 1.0 {
        return Err(Error::DegenerateChannel { t: 1.0 - s, m });
    }
    let ell = (s * (1.0 + s - gamma) / (-m.ln()) * base).ceil();
    Ok(SchemeParams {
        ell: ell as u64,
        eta: (1.0 - gamma) * base,
        gamma,
        eps1,
        eps2,
    })
}

/// Code length and threshold guaranteeing: no innocent user accused with
/// probability `1 - eps1`, and at least one colluder caught with probability
/// `1 - eps2`, when the decoder scores with the log-likelihood ratio matched
/// to the model's channel and bias.
pub fn simple_params(
    n: u64,
    eps1: f64,
    eps2: f64,
    model: &PositionModel,
) -> Result<SchemeParams> {
    check_eps(eps1, eps2)?;
    // Written as c * ln n - ln eps1 with c = 1 so the joint calculator
    // reduces to this one bit-exactly at c = 1.
    let base = (n as f64).ln() - eps1.ln();
    let gamma = (1.0 / eps2).ln() / base;
    params_for_gamma(model, Mode::Simple, base, gamma, eps1, eps2)
}

/// The joint analogue of [`simple_params`]: `n` is replaced by the `n^c`
/// bound on the number of all-innocent tuples, so the log budget becomes
/// `c ln n - ln eps1` and the moment function runs over `(z, y)`.
pub fn joint_params(n: u64, eps1: f64, eps2: f64, model: &PositionModel) -> Result<SchemeParams> {
    check_eps(eps1, eps2)?;
    let base = if model.c() == 1 {
        (n as f64).ln() - eps1.ln()
    } else {
        model.c() as f64 * (n as f64).ln() - eps1.ln()
    };
    let gamma = (1.0 / eps2).ln() / base;
    params_for_gamma(model, Mode::Joint, base, gamma, eps1, eps2)
}

/// Certain-catch construction for deterministic channels played at the
/// balance bias (`P(Y = 1) = 1/2`): with `ell = ceil(log2(n^c / eps1))` the
/// all-guilty tuple always scores exactly `ell ln 2`, and each surviving
/// all-innocent tuple must match the output in every position. `eps2` and
/// `gamma` are 0: the catch is certain.
pub fn deterministic_joint_params(c: usize, n: u64, eps1: f64) -> Result<SchemeParams> {
    check_eps(eps1, 0.5)?;
    let base = c as f64 * (n as f64).ln() - eps1.ln();
    Ok(SchemeParams {
        ell: (base / LN2).ceil() as u64,
        eta: base,
        gamma: 0.0,
        eps1,
        eps2: 0.0,
    })
}

/// The catch-all exponent split `gamma' = ln(c/eps2) / ln(n/eps1)`.
///
/// Heuristic, not a guarantee: it treats the `c` colluder scores as independent,
/// which the shared pirate output does not strictly justify. Callers should
/// surface it as such. `eps2 = c` degenerates to `gamma' = 0`, which the
/// downstream calculators reject.
pub fn catch_all_gamma(c: usize, n: u64, eps1: f64, eps2: f64) -> Result<f64> {
    check_eps(eps1, eps2)?;
    let gamma = (c as f64 / eps2).ln() / ((n as f64).ln() - eps1.ln());
    if gamma >= 1.0 {
        return Err(Error::IncompatibleBudgets { gamma });
    }
    Ok(gamma)
}

/// [`simple_params`] with the catch-one split replaced by [`catch_all_gamma`],
/// aiming to catch every colluder rather than at least one.
pub fn catch_all_params(
    n: u64,
    eps1: f64,
    eps2: f64,
    model: &PositionModel,
) -> Result<SchemeParams> {
    let gamma = catch_all_gamma(model.c(), n, eps1, eps2)?;
    let base = (n as f64).ln() - eps1.ln();
    params_for_gamma(model, Mode::Simple, base, gamma, eps1, eps2)
}

/// Published leading-order code lengths for the built-in channels at their
/// optimal biases. Deliberately excludes every lower-order correction so it
/// can serve as a pure oracle in ratio tests.
pub fn asymptotic_length(attack: Attack, c: usize, n: u64, mode: Mode) -> Result<f64> {
    let cf = c as f64;
    let ln_n = (n as f64).ln();
    let log2_n = ln_n / LN2;
    let h = |r: f64| -r * r.log2() - (1.0 - r) * (1.0 - r).log2();
    let rate = |r: f64| -> Result<f64> {
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::OutOfRange {
                what: "noise rate r",
                range: "(0, 1)",
                value: r,
            });
        }
        Ok(r)
    };
    Ok(match (attack, mode) {
        (Attack::Interleaving, _) => 2.0 * cf * cf * ln_n,
        (Attack::AllOne | Attack::Minority, Mode::Simple) => cf * ln_n / (LN2 * LN2),
        (Attack::Majority, Mode::Simple) => std::f64::consts::PI * cf * ln_n,
        (Attack::CoinFlip, Mode::Simple) => 4.0 * cf * ln_n / (LN2 * LN2),
        (Attack::Additive(r), Mode::Simple) => {
            let r = rate(r)?;
            let denom = LN2 * LN2 - r * LN2;
            if denom <= 0.0 {
                return Err(Error::NoAsymptotics {
                    attack: attack.to_string(),
                    mode: mode.to_string(),
                });
            }
            cf * ln_n / denom
        }
        (Attack::Dilution(r), Mode::Simple) => {
            rate(r)?;
            cf * ln_n / (LN2 * LN2)
        }
        (Attack::AllOne | Attack::Majority | Attack::Minority, Mode::Joint) => cf * log2_n,
        (Attack::CoinFlip, Mode::Joint) => cf * ln_n / (5f64 / 4.0).ln(),
        (Attack::Additive(r), Mode::Joint) => cf * log2_n / (1.0 - 0.5 * h(rate(r)?)),
        (Attack::Dilution(r), Mode::Joint) => cf * log2_n / (1.0 - 0.5 * LN2 * h(rate(r)?)),
    })
}

/// Attack-agnostic design: size the code for the interleaving attack at
/// `p = 1/2` (conjectured worst case for the universal decoder) and defer the
/// threshold to the normalized-score rule, so `eta` here lives on the
/// normalized scale (`Phi^-1(1 - eps1/n)`).
///
/// Two deliberate mismatches, surfaced to CLI metadata: the worst case is a
/// conjecture, and the actual encoder draws biases from the arcsine law while
/// `M` is evaluated at the fixed central bias where the interleaving
/// information sits on a plateau.
pub fn universal_design(c: usize, n: u64, eps1: f64, eps2: f64) -> Result<SchemeParams> {
    let channel = Attack::Interleaving.channel(c)?;
    let model = PositionModel::new(&channel, 0.5)?;
    let params = simple_params(n, eps1, eps2, &model)?;
    Ok(SchemeParams {
        eta: universal_threshold(n, eps1)?,
        ..params
    })
}
