//! Counter-based randomness.
//!
//! Every random bit used by the perturbation sampler is a pure function of
//! `(seed, sample index, position)`, so samples can be generated in any order
//! or in parallel with identical results. Sub-seeds for per-anchor or
//! per-instance streams are derived the same way.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix(mut z: u64) -> u64 {
    // SplitMix64 finalizer.
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent sub-seed from a parent seed and a key.
#[inline]
pub fn derive_seed(seed: u64, key: u64) -> u64 {
    mix(mix(seed.wrapping_add(GOLDEN)) ^ key.wrapping_mul(GOLDEN).wrapping_add(0x632B_E59B_D9B4_E019))
}

/// 64 uniform bits for positions `64 * block .. 64 * block + 63` of sample
/// `index`.
#[inline]
pub fn keyed_bits(seed: u64, index: u64, block: u64) -> u64 {
    mix(derive_seed(seed, index) ^ mix(block.wrapping_add(1).wrapping_mul(GOLDEN)))
}

/// Sequential generator for non-hot-path randomness (instance generation,
/// random tie-breaking, the copy-based sampler).
pub fn stream(seed: u64, key: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, key))
}
