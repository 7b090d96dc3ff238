//! Keyed random streams.
//!
//! Every random draw in the toolkit comes from a ChaCha stream whose seed is
//! derived from a tuple of keys (global seed, file index, output index, ...),
//! never from the order in which work happens to be executed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds a key tuple into a single 64-bit seed.
pub fn mix_keys(keys: &[u64]) -> u64 {
    keys.iter()
        .fold(0x5851_f42d_4c95_7f2d, |acc, &k| splitmix64(acc ^ splitmix64(k)))
}

/// A generator keyed by `keys`.
pub fn stream(keys: &[u64]) -> StreamRng {
    ChaCha8Rng::seed_from_u64(mix_keys(keys))
}

/// Stable 64-bit key for a string (FNV-1a).
pub fn str_key(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}
