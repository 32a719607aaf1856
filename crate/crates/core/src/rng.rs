//! Counter-based seed derivation.
//!
//! Every random quantity in a run comes from its own ChaCha stream whose seed
//! is `derive(parent, stream_id)`; a drop's parent seed is
//! `derive(master_seed, drop_index)`. Streams never share generator state, so
//! results do not depend on evaluation order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream identifiers for the per-drop random sources.
pub mod stream {
    pub const CHANNEL: u64 = 1;
    pub const NOISE: u64 = 2;
    pub const DATA_BITS: u64 = 3;
    pub const PILOTS: u64 = 4;
    pub const FILL: u64 = 5;
    pub const TAP_GAINS: u64 = 11;
    pub const TAP_SPEEDS: u64 = 12;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a parent seed with a counter into a child seed.
pub fn derive(parent: u64, counter: u64) -> u64 {
    splitmix64(splitmix64(parent) ^ counter.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
