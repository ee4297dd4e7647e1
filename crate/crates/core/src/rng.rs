//! Reproducible random streams keyed by (seed, replicate, purpose).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent purposes drawing randomness within one replicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Covariates = 0,
    Response = 1,
    Split = 2,
}

/// Generator for one (seed, replicate, stream) triple. Streams never overlap:
/// the seed selects the key and the (replicate, stream) pair the stream id.
pub fn stream_rng(seed: u64, rep: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep.wrapping_mul(4).wrapping_add(stream as u64));
    rng
}
