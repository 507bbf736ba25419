//! Seed derivation.
//!
//! Every random stream is a ChaCha8 generator seeded with a 64-bit value
//! derived from the root seed and a path of integers (trial, iteration,
//! user, ...). Derivation folds the path through the SplitMix64 finalizer,
//! so streams depend only on their path and never on scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Recorded in run manifests.
pub const RNG_ALGORITHM: &str = "ChaCha8 (rand_chacha 0.3, seed_from_u64), substreams via SplitMix64 path mixing";

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for the substream at `path` below `root`.
pub fn derive_seed(root: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(root), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn stream(root: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(root, path))
}
