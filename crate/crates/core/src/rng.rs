//! Seed derivation for reproducible, collision-free random streams.
//!
//! Every random matrix in the crate is drawn from a ChaCha8 stream keyed by a
//! 64-bit seed. Seeds for nested work units (cell, replication, matrix) are
//! derived from a base seed with a SplitMix64-style mixer, so that parallel
//! replications never share a stream and results do not depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
pub fn mix64(mut x: u64) -> u64 {
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Derives a child seed from `base` and a path of indices, e.g.
/// `derive_seed(base, &[cell, replication])`.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    path.iter().enumerate().fold(mix64(base), |h, (depth, &idx)| {
        let salt = (depth as u64 + 1).wrapping_mul(GOLDEN);
        mix64(h ^ mix64(idx.wrapping_add(salt)))
    })
}

/// The generator used for every random draw in the crate.
pub fn stream(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
