//! Deterministic seed derivation.
//!
//! Every pipeline stage draws randomness from a substream keyed by the master
//! seed plus a stage name, so reordering stages or re-running one of them
//! never shifts the draws of another. Per-item substreams (one per app, one
//! per fold) hang off the stage seed the same way.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// FNV-1a 64-bit hash. Used to key substreams by name and to fingerprint
/// vocabularies; not a cryptographic hash.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// SplitMix64 finalizer; decorrelates structured inputs before they become
/// ChaCha seeds.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for a named stage substream of `master`.
pub fn stage_seed(master: u64, stage: &str) -> u64 {
    splitmix64(master ^ fnv1a64(stage.as_bytes()))
}

/// RNG for a named stage.
pub fn stage_rng(master: u64, stage: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stage_seed(master, stage))
}

/// RNG for one item (an app id, a fold label) within a stage.
pub fn item_rng(master: u64, stage: &str, item: &str) -> ChaCha8Rng {
    let seed = splitmix64(stage_seed(master, stage) ^ fnv1a64(item.as_bytes()));
    ChaCha8Rng::seed_from_u64(seed)
}
