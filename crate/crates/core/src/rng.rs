//! Seeded, splittable randomness.
//!
//! Every public sampler takes a generator created here. The contract:
//!
//! * one user-facing 64-bit seed per run;
//! * independent consumers derive their own stream with [`stream`], keyed
//!   by a stable label, so adding a consumer never perturbs the draws of
//!   existing ones;
//! * ChaCha is counter-based, so a (seed, label) pair fully determines the
//!   sequence regardless of platform or thread interleaving.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// The concrete generator used throughout the crate.
pub type SplitRng = ChaCha12Rng;

/// Root generator for a run.
pub fn root(seed: u64) -> SplitRng {
    ChaCha12Rng::seed_from_u64(seed)
}

/// Independent labeled stream derived from the run seed.
///
/// Streams with distinct labels never overlap (distinct ChaCha stream
/// words select disjoint keystreams for the same key).
pub fn stream(seed: u64, label: &str) -> SplitRng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(fnv1a64(label.as_bytes()));
    rng
}

/// Numbered substream, for per-sample generators inside parallel loops.
pub fn substream(seed: u64, label: &str, index: u64) -> SplitRng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut key = fnv1a64(label.as_bytes());
    // Mix the index with an odd multiplier so (label, index) collisions
    // require a 64-bit coincidence rather than small-integer overlap.
    key ^= index.wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(17);
    rng.set_stream(key);
    rng
}

/// FNV-1a, fixed forever; `std` hashers are not stable across releases.
fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
