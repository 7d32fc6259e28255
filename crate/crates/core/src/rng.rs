//! Named random sub-streams.
//!
//! Every simulation draws from a single user seed; independent chains,
//! paths and auxiliary draws each get their own ChaCha stream so results do
//! not depend on thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Stream ids below this offset are reserved for per-path/per-chain use.
const AUX_STREAM_BASE: u64 = 1 << 48;

/// Generator for path or chain `index` under `seed`.
pub fn stream(seed: u64, index: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Generator for a named auxiliary purpose (initial states, atom draws...).
pub fn aux_stream(seed: u64, purpose: u64) -> SimRng {
    stream(seed, AUX_STREAM_BASE + purpose)
}
