//! Seeded, portable random number generation.
//!
//! All randomness flows through ChaCha8 generators constructed here. A
//! consumer-specific stream id keeps draws for attractors, roots, obstacles,
//! and post-processing independent of one another, so adding draws to one
//! consumer never perturbs the others. Batch items get independent seeds via
//! [`split`], a splitmix64-based hash of (master seed, item index).

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream id for attractor grid jitter.
pub const STREAM_ATTRACTORS: u64 = 0;
/// Stream id for root placement draws.
pub const STREAM_ROOTS: u64 = 1;
/// Stream id for obstacle parameter resolution.
pub const STREAM_OBSTACLES: u64 = 2;
/// Stream id for raster post-processing (crops, flips).
pub const STREAM_POST: u64 = 3;

/// ChaCha8 generator for one (seed, stream) pair.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derive the seed for item `index` of a batch keyed by `master`.
///
/// Distinct (master, index) pairs map to well-separated seeds, so batch items
/// are independently reproducible regardless of generation order.
pub fn split(master: u64, index: u64) -> u64 {
    splitmix64(master.wrapping_add(splitmix64(index)))
}

/// splitmix64 finalizer (Steele, Lea & Flood 2014).
fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}
