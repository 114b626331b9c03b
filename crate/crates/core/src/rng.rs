//! Counter-based random streams.
//!
//! Every conditional draw gets its own ChaCha8 stream whose 256-bit key is the
//! tuple `(seed, chain, step, iteration, index)`. How much randomness one draw
//! consumes never shifts any other draw, so two runs that differ only in data
//! that a draw does not condition on reproduce that draw exactly.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream identifiers for the sampler and the simulators.
pub mod step {
    pub const CASE_CLASS: u32 = 1;
    pub const CASE_SUBCLASS: u32 = 2;
    pub const CONTROL_SUBCLASS: u32 = 3;
    pub const ETA: u32 = 4;
    pub const NU: u32 = 5;
    pub const ALPHA: u32 = 6;
    pub const TPR: u32 = 7;
    pub const FPR: u32 = 8;
    pub const PI: u32 = 9;
    pub const INIT: u32 = 100;
    pub const SIMULATE_CASE: u32 = 200;
    pub const SIMULATE_CONTROL: u32 = 201;
    pub const REPLICATE: u32 = 300;
    pub const PRIOR_DRAW: u32 = 400;
}

/// Key of one stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub seed: u64,
    pub chain: u32,
    pub step: u32,
    pub iteration: u64,
    pub index: u64,
}

impl StreamKey {
    pub fn new(seed: u64, chain: u32, step: u32, iteration: u64, index: u64) -> Self {
        StreamKey {
            seed,
            chain,
            step,
            iteration,
            index,
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[0..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..12].copy_from_slice(&self.chain.to_le_bytes());
        key[12..16].copy_from_slice(&self.step.to_le_bytes());
        key[16..24].copy_from_slice(&self.iteration.to_le_bytes());
        key[24..32].copy_from_slice(&self.index.to_le_bytes());
        ChaCha8Rng::from_seed(key)
    }
}

/// Shorthand for `StreamKey::new(..).rng()`.
pub fn stream(seed: u64, chain: u32, step: u32, iteration: u64, index: u64) -> ChaCha8Rng {
    StreamKey::new(seed, chain, step, iteration, index).rng()
}

/// SplitMix64 finalizer, used to derive child seeds (replicates, chains).
pub fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
