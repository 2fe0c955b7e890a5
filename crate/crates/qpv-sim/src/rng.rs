//! Deterministic counter-based random streams.
//!
//! Every protocol round owns an independent ChaCha8 stream keyed by
//! `(master_seed, round_index)`. Rounds can therefore be simulated in any
//! order or in parallel and still produce results bit-identical to a
//! sequential run. Within a round the draw order is fixed: round drawing
//! (basis, parity, state assignment) first, then the optics sampler, then
//! any adversary draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The per-round random stream for `round_index` under `master_seed`.
pub fn round_stream(master_seed: u64, round_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(round_index);
    rng
}
