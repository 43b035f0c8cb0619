//! Core domain types shared by every other module.
//!
//! All types here are plain immutable data with validating constructors; the
//! algorithms live elsewhere. Everything is `Send + Sync` so trial workers can
//! share them freely.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A colluder-symmetric collusion channel (or group-testing noise model).
///
/// `theta[z]` is the probability that the coalition outputs a `1` in a
/// position where exactly `z` of its `c` members received a `1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ChannelRepr", into = "ChannelRepr")]
pub struct CollusionChannel {
    c: usize,
    theta: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ChannelRepr {
    c: usize,
    theta: Vec<f64>,
}

impl TryFrom<ChannelRepr> for CollusionChannel {
    type Error = Error;
    fn try_from(r: ChannelRepr) -> Result<Self> {
        CollusionChannel::new(r.theta, r.c)
    }
}

impl From<CollusionChannel> for ChannelRepr {
    fn from(ch: CollusionChannel) -> Self {
        ChannelRepr {
            c: ch.c,
            theta: ch.theta,
        }
    }
}

impl CollusionChannel {
    /// Validate and wrap a probability vector `theta` for coalition size `c`.
    ///
    /// Bounds are exact: entries of `0.0` and `1.0` are legal, anything
    /// outside `[0, 1]` or a length other than `c + 1` is rejected.
    pub fn new(theta: Vec<f64>, c: usize) -> Result<Self> {
        if c == 0 {
            return Err(Error::OutOfRange {
                what: "coalition size c",
                range: "[1, ...)",
                value: 0.0,
            });
        }
        if theta.len() != c + 1 {
            return Err(Error::ThetaLength {
                expected: c + 1,
                got: theta.len(),
            });
        }
        for &t in &theta {
            if !(0.0..=1.0).contains(&t) || t.is_nan() {
                return Err(Error::OutOfRange {
                    what: "theta entry",
                    range: "[0, 1]",
                    value: t,
                });
            }
        }
        Ok(Self { c, theta })
    }

    pub fn c(&self) -> usize {
        self.c
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    /// `P(Y = 1 | Z = z)`.
    pub fn theta_at(&self, z: usize) -> f64 {
        self.theta[z]
    }

    /// Whether unanimous coalitions are forced to repeat their symbol
    /// (`theta[0] == 0` and `theta[c] == 1`). Computed, never asserted:
    /// noisy group-testing channels legitimately violate it.
    pub fn is_marking(&self) -> bool {
        self.theta[0] == 0.0 && self.theta[self.c] == 1.0
    }

    /// Whether every entry is exactly 0 or 1.
    pub fn is_deterministic(&self) -> bool {
        self.theta.iter().all(|&t| t == 0.0 || t == 1.0)
    }
}

/// How per-position biases are drawn by the encoder.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[serde(try_from = "BiasRepr", into = "BiasRepr")]
pub enum BiasDistribution {
    /// Every position uses the same bias `p`.
    FixedP(f64),
    /// Arcsine density restricted to `[delta, 1 - delta]`; `delta = 0` is the
    /// cut-off-free encoder.
    Arcsine { cutoff: f64 },
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum BiasRepr {
    FixedP(f64),
    Arcsine { cutoff: f64 },
}

impl TryFrom<BiasRepr> for BiasDistribution {
    type Error = Error;
    fn try_from(r: BiasRepr) -> Result<Self> {
        match r {
            BiasRepr::FixedP(p) => BiasDistribution::fixed(p),
            BiasRepr::Arcsine { cutoff } => BiasDistribution::arcsine(cutoff),
        }
    }
}

impl From<BiasDistribution> for BiasRepr {
    fn from(b: BiasDistribution) -> Self {
        match b {
            BiasDistribution::FixedP(p) => BiasRepr::FixedP(p),
            BiasDistribution::Arcsine { cutoff } => BiasRepr::Arcsine { cutoff },
        }
    }
}

impl BiasDistribution {
    /// Constant bias, `0 < p < 1` strictly.
    pub fn fixed(p: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::OutOfRange {
                what: "fixed bias p",
                range: "(0, 1)",
                value: p,
            });
        }
        Ok(Self::FixedP(p))
    }

    /// Arcsine law with cut-off `0 <= delta < 1/2`.
    pub fn arcsine(cutoff: f64) -> Result<Self> {
        if !(0.0..0.5).contains(&cutoff) {
            return Err(Error::OutOfRange {
                what: "arcsine cutoff delta",
                range: "[0, 1/2)",
                value: cutoff,
            });
        }
        Ok(Self::Arcsine { cutoff })
    }
}

impl std::str::FromStr for BiasDistribution {
    type Err = Error;

    /// Parses the CLI syntax `fixed:<p>` or `arcsine[:<delta>]`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("unknown bias distribution `{s}`"));
        match s.split_once(':') {
            Some(("fixed", p)) => {
                BiasDistribution::fixed(p.parse::<f64>().map_err(|_| bad())?)
            }
            Some(("arcsine", d)) => {
                BiasDistribution::arcsine(d.parse::<f64>().map_err(|_| bad())?)
            }
            None if s == "arcsine" => BiasDistribution::arcsine(0.0),
            _ => Err(bad()),
        }
    }
}

/// An `n x ell` binary code together with the bias vector that generated it.
/// Bits are stored row-major, one row per user.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CodeRepr", into = "CodeRepr")]
pub struct Code {
    n: usize,
    ell: usize,
    bits: Vec<u8>,
    biases: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CodeRepr {
    n: usize,
    ell: usize,
    bits: Vec<u8>,
    biases: Vec<f64>,
}

impl TryFrom<CodeRepr> for Code {
    type Error = Error;
    fn try_from(r: CodeRepr) -> Result<Self> {
        Code::new(r.n, r.ell, r.bits, r.biases)
    }
}

impl From<Code> for CodeRepr {
    fn from(c: Code) -> Self {
        CodeRepr {
            n: c.n,
            ell: c.ell,
            bits: c.bits,
            biases: c.biases,
        }
    }
}

impl Code {
    pub fn new(n: usize, ell: usize, bits: Vec<u8>, biases: Vec<f64>) -> Result<Self> {
        if bits.len() != n * ell {
            return Err(Error::DimensionMismatch(format!(
                "code has {} bits, expected n * ell = {}",
                bits.len(),
                n * ell
            )));
        }
        if biases.len() != ell {
            return Err(Error::DimensionMismatch(format!(
                "code has {} biases, expected ell = {}",
                biases.len(),
                ell
            )));
        }
        if let Some(&b) = bits.iter().find(|&&b| b > 1) {
            return Err(Error::OutOfRange {
                what: "code bit",
                range: "{0, 1}",
                value: b as f64,
            });
        }
        for &p in &biases {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::OutOfRange {
                    what: "code bias",
                    range: "(0, 1)",
                    value: p,
                });
            }
        }
        Ok(Self {
            n,
            ell,
            bits,
            biases,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    /// The bit assigned to `user` at position `pos`.
    pub fn bit(&self, user: usize, pos: usize) -> u8 {
        self.bits[user * self.ell + pos]
    }

    /// A user's whole code word.
    pub fn row(&self, user: usize) -> &[u8] {
        &self.bits[user * self.ell..(user + 1) * self.ell]
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }
}

/// The word the coalition produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PirateOutput(Vec<u8>);

impl PirateOutput {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if let Some(&b) = bits.iter().find(|&&b| b > 1) {
            return Err(Error::OutOfRange {
                what: "pirate output bit",
                range: "{0, 1}",
                value: b as f64,
            });
        }
        Ok(Self(bits))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[u8] {
        &self.0
    }
}

/// The `(ell, eta, gamma, eps1, eps2)` bundle a parameter calculator returns.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchemeParams {
    /// Code length, ceiled to an integer (the bounds are monotone in `ell`).
    pub ell: u64,
    /// Accusation threshold, kept real.
    pub eta: f64,
    /// `ln(1/eps2) / ln(n/eps1)` (or its joint / catch-all analogue).
    pub gamma: f64,
    pub eps1: f64,
    pub eps2: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_channel_is_marking() {
        let ch = CollusionChannel::new(vec![0.0, 1.0], 1).unwrap();
        assert!(ch.is_marking());
        assert!(ch.is_deterministic());
    }

    #[test]
    fn coin_flip_channel_is_valid() {
        let ch = CollusionChannel::new(vec![0.0, 0.5, 1.0], 2).unwrap();
        assert!(ch.is_marking());
        assert!(!ch.is_deterministic());
    }

    #[test]
    fn channel_length_mismatch_rejected() {
        assert!(matches!(
            CollusionChannel::new(vec![0.2, 1.0], 2),
            Err(Error::ThetaLength {
                expected: 3,
                got: 2
            })
        ));
    }

    #[test]
    fn channel_entry_out_of_range_rejected() {
        assert!(CollusionChannel::new(vec![0.0, 1.2], 1).is_err());
        assert!(CollusionChannel::new(vec![-0.1, 1.0], 1).is_err());
        assert!(CollusionChannel::new(vec![0.0, f64::NAN], 1).is_err());
    }

    #[test]
    fn tiny_bias_is_legal() {
        // validation uses exact bounds, no epsilon slack
        assert!(BiasDistribution::fixed(1e-300).is_ok());
        assert!(BiasDistribution::fixed(0.0).is_err());
        assert!(BiasDistribution::fixed(1.0).is_err());
    }

    #[test]
    fn arcsine_cutoff_range() {
        assert!(BiasDistribution::arcsine(0.0).is_ok());
        assert!(BiasDistribution::arcsine(0.499).is_ok());
        assert!(BiasDistribution::arcsine(0.5).is_err());
        assert!(BiasDistribution::arcsine(-0.01).is_err());
    }

    #[test]
    fn bias_cli_syntax() {
        assert_eq!(
            "fixed:0.3".parse::<BiasDistribution>().unwrap(),
            BiasDistribution::FixedP(0.3)
        );
        assert_eq!(
            "arcsine".parse::<BiasDistribution>().unwrap(),
            BiasDistribution::Arcsine { cutoff: 0.0 }
        );
        assert_eq!(
            "arcsine:0.05".parse::<BiasDistribution>().unwrap(),
            BiasDistribution::Arcsine { cutoff: 0.05 }
        );
        assert!("fixed".parse::<BiasDistribution>().is_err());
        assert!("fixed:2".parse::<BiasDistribution>().is_err());
    }

    #[test]
    fn code_accessors_and_validation() {
        let code = Code::new(2, 3, vec![0, 1, 0, 1, 1, 0], vec![0.5, 0.25, 0.75]).unwrap();
        assert_eq!(code.bit(0, 1), 1);
        assert_eq!(code.bit(1, 2), 0);
        assert_eq!(code.row(1), &[1, 1, 0]);
        assert!(Code::new(2, 3, vec![0; 5], vec![0.5; 3]).is_err());
        assert!(Code::new(1, 1, vec![2], vec![0.5]).is_err());
        assert!(Code::new(1, 1, vec![0], vec![1.0]).is_err());
    }

    #[test]
    fn serde_round_trip_is_identity() {
        let ch = CollusionChannel::new(vec![0.0, 0.5, 1.0], 2).unwrap();
        let back: CollusionChannel =
            serde_json::from_str(&serde_json::to_string(&ch).unwrap()).unwrap();
        assert_eq!(ch, back);

        let code = Code::new(2, 2, vec![1, 0, 0, 1], vec![0.25, 0.5]).unwrap();
        let back: Code = serde_json::from_str(&serde_json::to_string(&code).unwrap()).unwrap();
        assert_eq!(code, back);

        let params = SchemeParams {
            ell: 12,
            eta: 3.5,
            gamma: 0.1,
            eps1: 0.05,
            eps2: 0.5,
        };
        let back: SchemeParams =
            serde_json::from_str(&serde_json::to_string(&params).unwrap()).unwrap();
        assert_eq!(params, back);
    }

    #[test]
    fn serde_rejects_invalid_channel() {
        let json = r#"{"c": 2, "theta": [0.0, 1.5, 1.0]}"#;
        assert!(serde_json::from_str::<CollusionChannel>(json).is_err());
    }
}
