//! Deterministic derivation of independent random streams.
//!
//! Every randomized stage (synthetic generation, bootstrap resampling,
//! shuffling, per-fold training) gets its own stream derived from one master
//! seed, a purpose tag, and an index. Streams derived with different tags or
//! indices are statistically independent, and the derivation is pure, so the
//! same master seed reproduces every draw regardless of execution order —
//! including when work is distributed across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Derive a child seed from a master seed, a purpose tag, and an index.
pub fn derive(base: u64, tag: &str, index: u64) -> u64 {
    // FNV-1a folds the tag into the base; splitmix64 then decorrelates
    // nearby (base, index) pairs.
    let mut tag_hash = 0xcbf2_9ce4_8422_2325u64;
    for byte in tag.bytes() {
        tag_hash ^= byte as u64;
        tag_hash = tag_hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix64(base ^ tag_hash ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// One step of the splitmix64 mixing function.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A fresh RNG for the stream identified by `(base, tag, index)`.
pub fn stream(base: u64, tag: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(base, tag, index))
}
