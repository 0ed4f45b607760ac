//! Seed derivation for independent, reproducible random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// One SplitMix64 output step; mixes a 64-bit state into a well-spread word.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from a parent seed and a stream label.
pub fn derive_seed(parent: u64, label: u64) -> u64 {
    splitmix64(splitmix64(parent) ^ label.wrapping_mul(0xD1B5_4A32_D192_ED03))
}

pub fn stream(parent: u64, label: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(derive_seed(parent, label))
}

pub fn from_seed(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed)
}
