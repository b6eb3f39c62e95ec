//! Seed streams. Every path draws from its own generator keyed by
//! `(seed, path_index)`, so ensembles are reproducible regardless of how
//! the work is split across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

pub type PathRng = ChaCha12Rng;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream seed for one path of an ensemble.
pub fn stream_seed(seed: u64, path_index: u64) -> u64 {
    mix64(mix64(seed) ^ mix64(path_index.wrapping_add(0x5851_F42D_4C95_7F2D)))
}

/// Derived seed for a named sub-stream (e.g. the Wiener block vs. the
/// Hermite block of an effective drive).
pub fn substream(seed: u64, tag: u64) -> u64 {
    mix64(seed ^ mix64(tag.wrapping_mul(0xD6E8_FEB8_6659_FD93)))
}

pub fn path_rng(seed: u64, path_index: u64) -> PathRng {
    PathRng::seed_from_u64(stream_seed(seed, path_index))
}

pub fn rng(seed: u64) -> PathRng {
    PathRng::seed_from_u64(mix64(seed))
}
