//! The named pirate attacks and group-testing noise models, plus the
//! machinery that turns a coalition's code words into pirate output.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Code, CollusionChannel, PirateOutput};

/// The built-in collusion strategies and test models.
///
/// The first five are fingerprinting attacks satisfying the marking
/// assumption; `Additive` and `Dilution` are noisy group-testing models and
/// need a noise rate `r` in `(0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Attack {
    /// Output a uniformly random member's symbol: `theta[z] = z / c`.
    #[serde(rename = "interleaving")]
    Interleaving,
    /// Output `1` whenever at least one member holds a `1`. Identical to the
    /// classical group-testing model.
    #[serde(rename = "all1")]
    AllOne,
    /// Output the most common received symbol; exact ties fall to a fair coin.
    #[serde(rename = "majority")]
    Majority,
    /// Output the least common received symbol (still subject to marking).
    #[serde(rename = "minority")]
    Minority,
    /// Flip a fair coin whenever both symbols were received.
    #[serde(rename = "coinflip")]
    CoinFlip,
    /// Classical group testing with false positives: `theta[0] = r`.
    #[serde(rename = "additive")]
    Additive(f64),
    /// Each defective escapes a test independently with rate `r`:
    /// `theta[z] = 1 - r^z`.
    #[serde(rename = "dilution")]
    Dilution(f64),
}

impl Attack {
    /// The bare CLI name (the noise rate is carried separately).
    pub fn name(&self) -> &'static str {
        match self {
            Attack::Interleaving => "interleaving",
            Attack::AllOne => "all1",
            Attack::Majority => "majority",
            Attack::Minority => "minority",
            Attack::CoinFlip => "coinflip",
            Attack::Additive(_) => "additive",
            Attack::Dilution(_) => "dilution",
        }
    }

    /// All five fingerprinting attacks, in the conventional order.
    pub fn fingerprinting() -> [Attack; 5] {
        [
            Attack::Interleaving,
            Attack::AllOne,
            Attack::Majority,
            Attack::Minority,
            Attack::CoinFlip,
        ]
    }

    /// Instantiate the channel vector for coalition size `c`.
    pub fn channel(&self, c: usize) -> Result<CollusionChannel> {
        if c == 0 {
            return Err(Error::OutOfRange {
                what: "coalition size c",
                range: "[1, ...)",
                value: 0.0,
            });
        }
        let theta = match *self {
            Attack::Interleaving => (0..=c).map(|z| z as f64 / c as f64).collect(),
            Attack::AllOne => (0..=c).map(|z| if z == 0 { 0.0 } else { 1.0 }).collect(),
            Attack::Majority => (0..=c)
                .map(|z| match (2 * z).cmp(&c) {
                    std::cmp::Ordering::Less => 0.0,
                    std::cmp::Ordering::Equal => 0.5,
                    std::cmp::Ordering::Greater => 1.0,
                })
                .collect(),
            Attack::Minority => (0..=c)
                .map(|z| {
                    if z == c || (z > 0 && 2 * z < c) {
                        1.0
                    } else if z == 0 || 2 * z > c {
                        0.0
                    } else {
                        0.5
                    }
                })
                .collect(),
            Attack::CoinFlip => (0..=c)
                .map(|z| {
                    if z == 0 {
                        0.0
                    } else if z == c {
                        1.0
                    } else {
                        0.5
                    }
                })
                .collect(),
            Attack::Additive(r) => {
                check_rate(r)?;
                (0..=c).map(|z| if z == 0 { r } else { 1.0 }).collect()
            }
            Attack::Dilution(r) => {
                check_rate(r)?;
                (0..=c).map(|z| 1.0 - r.powi(z as i32)).collect()
            }
        };
        CollusionChannel::new(theta, c)
    }
}

fn check_rate(r: f64) -> Result<()> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::OutOfRange {
            what: "noise rate r",
            range: "(0, 1)",
            value: r,
        });
    }
    Ok(())
}

impl std::str::FromStr for Attack {
    type Err = Error;

    /// Parses `interleaving | all1 | majority | minority | coinflip`
    /// or `additive:<r> | dilution:<r>`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("unknown attack `{s}`"));
        if let Some((name, r)) = s.split_once(':') {
            let r: f64 = r.parse().map_err(|_| bad())?;
            return match name {
                "additive" => Ok(Attack::Additive(r)),
                "dilution" => Ok(Attack::Dilution(r)),
                _ => Err(bad()),
            };
        }
        match s {
            "interleaving" => Ok(Attack::Interleaving),
            "all1" => Ok(Attack::AllOne),
            "majority" => Ok(Attack::Majority),
            "minority" => Ok(Attack::Minority),
            "coinflip" => Ok(Attack::CoinFlip),
            "additive" | "dilution" => Err(Error::InvalidConfig(format!(
                "attack `{s}` needs a noise rate, e.g. `{s}:0.25`"
            ))),
            _ => Err(bad()),
        }
    }
}

impl std::fmt::Display for Attack {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Attack::Additive(r) => write!(f, "additive:{r}"),
            Attack::Dilution(r) => write!(f, "dilution:{r}"),
            _ => f.write_str(self.name()),
        }
    }
}

/// Run the collusion channel over a coalition's code words.
///
/// Position `i` tallies `z_i = sum of the coalition's bits` and draws
/// `Y_i ~ Bernoulli(theta[z_i])` from `rng`. Exactly one uniform is consumed
/// per position, so deterministic channels produce identical output under any
/// seed while keeping the stream layout fixed.
pub fn apply_channel(
    code: &Code,
    coalition: &[usize],
    channel: &CollusionChannel,
    rng: &mut impl Rng,
) -> Result<PirateOutput> {
    if coalition.len() != channel.c() {
        return Err(Error::CoalitionSize {
            expected: channel.c(),
            got: coalition.len(),
        });
    }
    let mut seen = vec![false; code.n()];
    for &j in coalition {
        if j >= code.n() {
            return Err(Error::DimensionMismatch(format!(
                "coalition member {j} outside user range 0..{}",
                code.n()
            )));
        }
        if std::mem::replace(&mut seen[j], true) {
            return Err(Error::DimensionMismatch(format!(
                "coalition member {j} listed twice"
            )));
        }
    }
    let ell = code.ell();
    let mut out = Vec::with_capacity(ell);
    for i in 0..ell {
        let z: usize = coalition.iter().map(|&j| code.bit(j, i) as usize).sum();
        let u: f64 = rng.gen();
        out.push(u8::from(u < channel.theta_at(z)));
    }
    PirateOutput::new(out)
}
