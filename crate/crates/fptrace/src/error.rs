//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("channel vector has length {got}, expected c + 1 = {expected}")]
    ThetaLength { expected: usize, got: usize },

    #[error("{what} = {value} outside {range}")]
    OutOfRange {
        what: &'static str,
        range: &'static str,
        value: f64,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("coalition has {got} members, channel expects {expected}")]
    CoalitionSize { expected: usize, got: usize },

    #[error("error budgets incompatible: gamma = {gamma} >= 1")]
    IncompatibleBudgets { gamma: f64 },

    #[error("degenerate channel: M({t}) = {m} >= 1, scores carry no information")]
    DegenerateChannel { t: f64, m: f64 },

    #[error("channel is not deterministic (some theta entry is not 0 or 1)")]
    NotDeterministic,

    #[error("no bias p in (0,1) balances the output distribution")]
    NoBalanceRoot,

    #[error("variance under the averaging hypothesis must be positive, got {0}")]
    NonPositiveVariance(f64),

    #[error("C(n, c) = {tuples:.3e} size-c subsets exceeds the enumeration cap {cap:.3e}")]
    TupleCapExceeded { tuples: f64, cap: f64 },

    #[error("no asymptotic code length is published for {attack} in {mode} decoding")]
    NoAsymptotics { attack: String, mode: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = core::result::Result<T, Error>;
