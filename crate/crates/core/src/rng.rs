//! Seeded random streams.
//!
//! Every stochastic operation takes an explicit `(seed, stream)` pair and
//! builds its own ChaCha generator from it; there is no shared RNG state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator for `stream` under `seed`. Distinct streams are independent.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derives a child seed; used to hand out per-start and per-iteration seeds.
pub fn child_seed(seed: u64, path: &[u64]) -> u64 {
    use rand::RngCore;
    let mut s = seed;
    for &p in path {
        s = stream_rng(s, p).next_u64();
    }
    s
}
