//! Reproducible randomness. Every stochastic routine in this crate draws from
//! ChaCha12 generators derived from a user-supplied master seed; parallel work
//! items get independent streams keyed by item index, so results are identical
//! whether they run on one thread or many.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Generator for stream `stream` of master seed `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
