//! Seeded random streams.
//!
//! All randomness is derived from a root seed through named substreams so
//! that each pipeline stage can be reproduced independently of the others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Generator for a bare seed.
pub fn from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives a child seed from `seed`, a stage name and an index.
///
/// FNV-1a over the stage name, folded with the parent seed and index through
/// a splitmix64 finaliser. Stable across platforms and releases.
pub fn substream_seed(seed: u64, stage: &str, index: u64) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in stage.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix(splitmix(seed ^ h).wrapping_add(index))
}

/// Generator for a named substream.
pub fn substream(seed: u64, stage: &str, index: u64) -> Rng {
    from_seed(substream_seed(seed, stage, index))
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
