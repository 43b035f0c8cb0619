//! Collusion-resistant fingerprinting codes and probabilistic group testing
//! with log-likelihood decoders.
//!
//! The library plays all three roles of the tracing game:
//!
//! - **encode**: bias-based binary codes, with fixed or arcsine-distributed
//!   per-position biases ([`encoder`]);
//! - **collude**: the named pirate attacks and noisy group-testing channels
//!   ([`channels`]);
//! - **decode**: per-user and per-tuple log-likelihood scores, score
//!   normalization, and threshold accusation ([`decoders`]).
//!
//! Around that sit an exact per-position probability engine ([`probability`]),
//! calculators that turn error budgets `(eps1, eps2)` into code lengths and
//! thresholds ([`params`]), and a reproducible Monte Carlo harness that
//! measures false-positive/false-negative rates against those budgets
//! ([`sim`]). The `fptrace` binary exposes all of it on the command line.
//!
//! ```rust
//! use fptrace::channels::Attack;
//! use fptrace::params::simple_params;
//! use fptrace::probability::{optimal_bias, Mode, PositionModel};
//!
//! // Size a code so that, against the all-1 attack played by 3 colluders
//! // among 1000 users, innocent and missed-catch failures each stay under 5%.
//! let channel = Attack::AllOne.channel(3)?;
//! let p = optimal_bias(&channel, Mode::Simple);
//! let model = PositionModel::new(&channel, p)?;
//! let params = simple_params(1000, 0.05, 0.05, &model)?;
//! assert!(params.ell > 0);
//! assert!(params.eta > 0.0);
//! # Ok::<(), fptrace::Error>(())
//! ```

#![forbid(unsafe_code)]

pub mod channels;
pub mod decoders;
pub mod encoder;
mod error;
pub mod model;
pub mod params;
pub mod probability;
pub mod rng;
pub mod sim;
pub mod stats;

pub use error::{Error, Result};

// The guide chapters double as doc-tests so the book can never drift from the
// API. mdbook cannot run snippets against this crate itself, so `cargo test
// --doc` picks them up here instead.
#[cfg(doctest)]
mod book {
    macro_rules! chapter {
        ($name:ident, $path:literal) => {
            #[doc = include_str!($path)]
            mod $name {}
        };
    }

    chapter!(introduction, "../../../book/src/introduction.md");
    chapter!(model, "../../../book/src/model.md");
    chapter!(attacks, "../../../book/src/attacks.md");
    chapter!(position_statistics, "../../../book/src/position-statistics.md");
    chapter!(code_lengths, "../../../book/src/code-lengths.md");
    chapter!(encoders, "../../../book/src/encoders.md");
    chapter!(decoders, "../../../book/src/decoders.md");
    chapter!(simulation, "../../../book/src/simulation.md");
    chapter!(cli, "../../../book/src/cli.md");
}
