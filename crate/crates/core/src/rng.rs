//! Deterministic random streams.
//!
//! Every run is keyed by a single `u64` seed. Protocol draws for one
//! `(round, client)` pair come from their own ChaCha8 stream, so the draws a
//! client makes never depend on how many draws other clients made or on the
//! order in which clients are visited.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator used for graph construction.
pub fn graph_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent substream for the Phase-1 draws of `client` in `round`.
pub fn round_client_stream(seed: u64, round: u32, client: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((u64::from(round) << 32) | u64::from(client));
    rng
}

/// Seed used by trial `index` of an experiment with base seed `base`.
pub fn trial_seed(base: u64, index: u64) -> u64 {
    base.wrapping_add(index)
}
