//! Seeded random streams.
//!
//! Every stochastic component draws from a ChaCha8 generator keyed by the
//! user seed plus a fixed stream id, so that components never share state and
//! parallel workers (null filters, bench fits) get independent substreams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub const STREAM_BACKGROUND: u64 = 1;
pub const STREAM_EMBED: u64 = 2;
pub const STREAM_PLACE: u64 = 3;
pub const STREAM_FILTER_INIT: u64 = 4;
pub const STREAM_MEMBERS: u64 = 5;
/// Null filters use `STREAM_NULL_BASE + i` for filter `i`.
pub const STREAM_NULL_BASE: u64 = 1 << 32;

pub fn substream(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derive a child seed, e.g. one per dataset in a preset grid.
pub fn child_seed(seed: u64, index: u64) -> u64 {
    // splitmix64 finalizer over the pair
    let mut z = seed ^ index.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
