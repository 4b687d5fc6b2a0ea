//! Seeding rules.
//!
//! Every chain owns a [`ChainRng`]. Replicate `r` of a run with master seed
//! `s` uses `ChaCha8Rng::seed_from_u64(s)` with its word stream set to `r`,
//! so replicate streams never overlap and each can be replayed alone.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type ChainRng = ChaCha8Rng;

/// Generator for a single chain seeded from `seed`.
pub fn chain_rng(seed: u64) -> ChainRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Generator for replicate `stream` under master seed `seed`.
pub fn replicate_rng(seed: u64, stream: u64) -> ChainRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
