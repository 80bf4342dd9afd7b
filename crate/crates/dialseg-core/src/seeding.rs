//! Counter-based seed derivation.
//!
//! Every stochastic component in this crate draws from a ChaCha generator
//! seeded through [`subseed`], so results depend only on the root seed and the
//! logical position of the draw, never on scheduling or iteration order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Derive a child seed from a root seed and a logical tag (SplitMix64 finalizer).
pub fn subseed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Generator for one logical stream.
pub fn rng_for(seed: u64, tag: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(subseed(seed, tag))
}
