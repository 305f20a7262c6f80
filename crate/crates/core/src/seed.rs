//! Seed derivation.
//!
//! Every stochastic step draws from its own ChaCha8 stream. Stream seeds are
//! derived from the master seed as
//! `splitmix(master ^ splitmix(stream ^ splitmix(index)))`, so per-item
//! streams are independent of scheduling and thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stage tags used when fanning the master seed out to pipeline stages.
pub mod stream {
    pub const SYNTH: u64 = 1;
    pub const SPLIT: u64 = 2;
    pub const AUGMENT: u64 = 3;
    pub const MODEL: u64 = 4;
    pub const NOISE: u64 = 10;
    pub const SHIFT: u64 = 11;
    pub const MIXUP: u64 = 12;
    pub const OVERSAMPLE: u64 = 13;
    pub const INIT: u64 = 20;
    pub const SHUFFLE: u64 = 21;
    pub const DROPOUT: u64 = 22;
    pub const CHANNEL: u64 = 30;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(stream ^ splitmix64(index)))
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn derived_rng(master: u64, stream: u64, index: u64) -> Rng {
    rng(derive_seed(master, stream, index))
}
