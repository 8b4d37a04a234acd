//! Deterministic derivation of independent random substreams from one master seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags. Each consumer of randomness owns one tag so that adding draws
/// in one place never shifts another stream.
pub mod tag {
    pub const RUN: u64 = 0x52554e;
    pub const SAMPLING: u64 = 0x434d41;
    pub const REALIZATION_DRAW: u64 = 0x445257;
    pub const PROBLEM: u64 = 0x50524f;
    pub const FIELD: u64 = 0x464c44;
    pub const SHIFTS: u64 = 0x534846;
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a parent seed with a sequence of keys into a child seed.
pub fn derive(parent: u64, keys: &[u64]) -> u64 {
    keys.iter().fold(splitmix64(parent), |acc, &k| {
        splitmix64(acc ^ splitmix64(k))
    })
}

pub fn stream(parent: u64, keys: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(parent, keys))
}
