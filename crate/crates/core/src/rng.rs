//! Seeded random streams.
//!
//! Every random quantity is drawn from a ChaCha8 stream identified by a root
//! seed and a stream index, so independent trials never share state and a
//! run is reproducible from `(seed, stream)` alone.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream used for randomized output index draws inside a run.
pub const STREAM_OUTPUT_INDEX: u64 = 0;
/// Stream used by minibatch index generators.
pub const STREAM_BATCHES: u64 = 1;
/// Stream used for initialization noise.
pub const STREAM_INIT: u64 = 2;
/// Stream used for train/test splitting.
pub const STREAM_SPLIT: u64 = 3;
/// Stream used for synthetic data generation.
pub const STREAM_DATA: u64 = 4;

/// Returns the RNG for stream `stream` under `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Seed for trial `index` of an experiment rooted at `seed`.
///
/// SplitMix64 finalizer over `seed + index`, so consecutive trials (and
/// consecutive root seeds) land on unrelated ChaCha keys.
pub fn trial_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
