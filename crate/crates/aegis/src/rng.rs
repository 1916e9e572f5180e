//! Deterministic stream derivation.
//!
//! Every random draw in the simulator comes from a ChaCha stream whose seed is
//! derived from the master seed plus a list of string tags (task id, repeat
//! index, purpose, run index, attempt). Streams are independent per key, so
//! adding tasks or policies never perturbs the draws of existing ones.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// FNV-1a over the tag bytes, finalized with splitmix64. Stable across
/// platforms and builds (never uses `std::hash`).
pub fn derive_seed(master: u64, tags: &[&str]) -> u64 {
    const FNV_OFFSET: u64 = 0xcbf29ce484222325;
    const FNV_PRIME: u64 = 0x100000001b3;

    let mut h = FNV_OFFSET;
    for byte in master.to_le_bytes() {
        h = (h ^ byte as u64).wrapping_mul(FNV_PRIME);
    }
    for tag in tags {
        for byte in tag.as_bytes() {
            h = (h ^ *byte as u64).wrapping_mul(FNV_PRIME);
        }
        // separator so ("ab","c") != ("a","bc")
        h = (h ^ 0x1f).wrapping_mul(FNV_PRIME);
    }
    splitmix64(h)
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// ChaCha8 stream for a derived seed.
pub fn stream(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Convenience: derive and open in one call.
pub fn stream_for(master: u64, tags: &[&str]) -> ChaCha8Rng {
    stream(derive_seed(master, tags))
}
