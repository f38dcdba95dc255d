//! Seeded, counter-addressed random streams.
//!
//! Every consumer asks for a stream by `(seed, purpose, index)`, so the draws
//! of round 17 do not depend on how many numbers round 16 consumed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream purposes; the tag goes into the low bits of the stream id.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Examples = 1,
    WeakEstimate = 2,
    BalanceEstimate = 3,
    Learner = 4,
    Mask = 5,
    Query = 6,
    Rounding = 7,
    Instance = 8,
    Density = 9,
}

/// A reproducible stream for the given purpose and index.
pub fn stream(seed: u64, purpose: Purpose, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((index << 4) | purpose as u64);
    rng
}

/// Derives an independent child seed (splitmix64 finalizer).
pub fn child_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
