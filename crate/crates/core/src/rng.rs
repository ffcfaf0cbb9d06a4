//! Deterministic random streams.
//!
//! Every consumer of randomness gets its own stream derived from the run
//! seed, so marginal draws, label draws and Monte-Carlo evaluation never
//! share generator state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream used for unlabeled marginal draws.
pub const STREAM_MARGINAL: u64 = 1;
/// Stream used by the simulated label oracle.
pub const STREAM_LABELS: u64 = 2;
/// Stream used for Monte-Carlo evaluation.
pub const STREAM_EVAL: u64 = 3;
/// Stream used for random restarts and random feasible parameters.
pub const STREAM_SEARCH: u64 = 4;
/// Stream used to fit best-in-class comparators.
pub const STREAM_COMPARATOR: u64 = 5;

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn stream(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// A sub-stream keyed by an extra index (shard number, restart number, ...).
pub fn substream(seed: u64, stream: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(index.wrapping_add(1))));
    rng.set_stream(stream);
    rng
}

/// Stable hash of a point, used to seed per-point searches.
pub fn hash_point(values: &[f64]) -> u64 {
    values
        .iter()
        .fold(0x51_7C_C1_B7_27_22_0A_95u64, |acc, v| splitmix64(acc ^ v.to_bits()))
}
