//! Deterministic seed derivation for simulation streams.
//!
//! Every random draw in a run comes from a `ChaCha8` stream whose seed is
//! derived from the experiment base seed, a string tag, and an index. The
//! derivation is pure integer arithmetic (FNV-1a + splitmix64), so seeds are
//! stable across platforms and library versions; the standard library hasher
//! offers no such guarantee.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(GOLDEN);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Derives a child seed from a base seed, a stream tag, and an index.
pub fn child_seed(base: u64, tag: &str, index: u64) -> u64 {
    let mut h = FNV_OFFSET;
    for b in tag.as_bytes() {
        h = (h ^ u64::from(*b)).wrapping_mul(FNV_PRIME);
    }
    splitmix64(base ^ splitmix64(h.wrapping_add(index.wrapping_mul(GOLDEN))))
}

/// Builds the deterministic generator for a derived seed.
pub fn stream(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
