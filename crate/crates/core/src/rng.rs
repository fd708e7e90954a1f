//! Deterministic random substreams.
//!
//! Every stochastic object (a TWA sample, a quantum trajectory) draws from
//! ChaCha20 keyed by the run seed, with the object index selecting the
//! 64-bit stream. Results therefore do not depend on how work is split across
//! threads.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Independent generator for `(seed, index)`.
pub fn substream(seed: u64, index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
