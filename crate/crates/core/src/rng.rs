//! Seeded random streams.
//!
//! A master seed fans out into independent ChaCha streams: stream 0 belongs to
//! the environment (round-1 initialization and reward noise) and stream `i + 1`
//! to player `i` (delay draws). Named sub-seeds for experiment replications are
//! derived with SHA-256 so they do not depend on the standard library's hasher.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type SimRng = ChaCha8Rng;

pub const ENVIRONMENT_STREAM: u64 = 0;

pub fn stream(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn environment_stream(seed: u64) -> SimRng {
    stream(seed, ENVIRONMENT_STREAM)
}

pub fn player_stream(seed: u64, player: usize) -> SimRng {
    stream(seed, player as u64 + 1)
}

/// Mixes a base seed with a list of labels into a new 64-bit seed.
pub fn derive_seed(base: u64, labels: &[&str]) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(base.to_le_bytes());
    for label in labels {
        hasher.update((label.len() as u64).to_le_bytes());
        hasher.update(label.as_bytes());
    }
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}
