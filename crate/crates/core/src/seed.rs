//! Seed plumbing.
//!
//! Every random stream in the crate is a ChaCha8 generator seeded from a 64-bit value.
//! A stream for a given purpose is `seed ^ purpose constant`; indexed sub-streams
//! (trees, folds, bootstrap replicates) are then produced with a splitmix64 step over
//! `(stream seed, index)`. Results never depend on how work is scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Named purposes for derived random streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Split,
    SplitRetry,
    Folds,
    Forest,
    OutcomeModel,
    PropensityModel,
    RiskModel,
    CateModel,
    Features,
    Treatment,
    Noise,
    TieBreak,
    RandomPolicy,
    Bootstrap,
    Confounding,
}

impl Stream {
    pub const fn constant(self) -> u64 {
        match self {
            Stream::Split => 0x5b1e_7a3c_0000_0001,
            Stream::SplitRetry => 0x5b1e_7a3c_0000_0002,
            Stream::Folds => 0xf01d_5eed_0000_0003,
            Stream::Forest => 0xf0e5_7000_0000_0004,
            Stream::OutcomeModel => 0x0c0e_0000_0000_0005,
            Stream::PropensityModel => 0x9a0b_0000_0000_0006,
            Stream::RiskModel => 0x7153_0000_0000_0007,
            Stream::CateModel => 0xca7e_0000_0000_0008,
            Stream::Features => 0xfea7_0000_0000_0009,
            Stream::Treatment => 0x7ea7_0000_0000_000a,
            Stream::Noise => 0x4015_e000_0000_000b,
            Stream::TieBreak => 0x71eb_0000_0000_000c,
            Stream::RandomPolicy => 0x4a4d_0000_0000_000d,
            Stream::Bootstrap => 0xb007_0000_0000_000e,
            Stream::Confounding => 0xc0f0_0000_0000_000f,
        }
    }
}

/// `seed ^ purpose constant`.
pub fn derive(seed: u64, stream: Stream) -> u64 {
    seed ^ stream.constant()
}

/// Sub-stream `index` of `seed`.
pub fn child(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index.wrapping_add(0x9e37_79b9_7f4a_7c15)))
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn stream_rng(seed: u64, stream: Stream) -> Rng {
    rng(derive(seed, stream))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
