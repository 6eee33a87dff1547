//! Deterministic random streams.
//!
//! Every replica of every estimate owns its own ChaCha8 stream, addressed by
//! a 64-bit seed and a 64-bit stream id. Seeds for individual checks are
//! derived from the master seed and a text label, so the numbers a check sees
//! do not depend on how many workers run it or in which order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha8Rng;

/// Derives a child seed from `master` and a label.
pub fn derive_seed(master: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update((label.len() as u64).to_le_bytes());
    h.update(label.as_bytes());
    let out = h.finalize();
    u64::from_le_bytes(out[..8].try_into().expect("sha256 output is 32 bytes"))
}

/// Random stream `stream_id` of the generator family keyed by `seed`.
pub fn stream_rng(seed: u64, stream_id: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}
