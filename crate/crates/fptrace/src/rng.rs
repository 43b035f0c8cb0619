//! Reproducible random streams.
//!
//! Every trial gets its own counter-indexed ChaCha stream derived from the
//! master seed, so parallel and serial execution see identical randomness and
//! disjoint trial ranges never share state.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// SplitMix64 step; the standard way to spread a 64-bit seed into key bytes.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn expand_seed(seed: u64) -> [u8; 32] {
    let mut state = seed;
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    key
}

/// The stream for one trial: same key for the whole experiment, stream
/// counter set to the trial index.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::from_seed(expand_seed(seed));
    rng.set_stream(trial);
    rng
}
