//! Seedable per-path random streams.
//!
//! Every Monte Carlo path draws from its own ChaCha8 stream, selected by the
//! path index, so results do not depend on thread count or chunking.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type PathRng = ChaCha8Rng;

/// Stream `stream` of the generator seeded by `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> PathRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
