//! Seed derivation.
//!
//! All randomness comes from [`ChaCha8Rng`] seeded through
//! `SeedableRng::seed_from_u64`, whose expansion is fixed by `rand_core` and
//! stable across platforms. Independent streams are derived from a base seed by
//! running `(base, stream tag, index)` through the SplitMix64 finalizer, so a
//! replica's randomness depends only on the base seed and its own index.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Derivation domains. Walk and scenery seeds never share a domain, which keeps
/// the two sequences independent for every replica.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stream {
    Walk,
    Scenery,
    SceneryBlock,
    Sample,
}

impl Stream {
    fn tag(self) -> u64 {
        match self {
            Stream::Walk => 0x57A1_4B00_0000_0001,
            Stream::Scenery => 0x5CE9_E4F0_0000_0002,
            Stream::SceneryBlock => 0xB10C_4B10_0000_0003,
            Stream::Sample => 0x5A3E_91E0_0000_0004,
        }
    }
}

/// SplitMix64 finalizer (Stafford variant 13). Bijective on `u64`.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for item `index` of `stream` under `base`.
#[inline]
pub fn derive(base: u64, stream: Stream, index: u64) -> u64 {
    let keyed = mix64(base ^ stream.tag());
    mix64(keyed ^ index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA))
}

#[inline]
pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
