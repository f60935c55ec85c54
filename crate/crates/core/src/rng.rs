//! Deterministic random streams.
//!
//! Every stochastic phase draws from a ChaCha stream keyed by the run seed and
//! a small tuple of counters, so results do not depend on thread count or on
//! whether a run was resumed from a checkpoint.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed-and-path keyed stream.
pub fn stream(seed: u64, path: &[u64]) -> ChaCha8Rng {
    let mut h = mix(seed.wrapping_add(GOLDEN));
    for &p in path {
        h = mix(h ^ p.wrapping_add(GOLDEN).wrapping_mul(31));
    }
    ChaCha8Rng::seed_from_u64(h)
}

/// A child seed drawn from a keyed stream.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    rand::RngCore::next_u64(&mut stream(seed, path))
}
