//! Seed derivation. Every randomized routine receives a `u64` seed and
//! derives independent ChaCha streams from `(seed, label, index)`, so results
//! do not depend on scheduling or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

// splitmix64 finalizer
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stable child seed for a named stage. Stable across platforms and releases.
pub fn derive_seed(seed: u64, label: &str, index: u64) -> u64 {
    mix(mix(seed ^ fnv1a(label.as_bytes())) ^ mix(index.wrapping_add(0x5851_f42d_4c95_7f2d)))
}

/// Independent generator for `(seed, label, index)`.
pub fn stream(seed: u64, label: &str, index: u64) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(seed, label, index))
}
