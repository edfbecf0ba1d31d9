//! Seed splitting. Every random stream is a ChaCha8 generator whose seed is
//! the first 8 bytes (little endian) of `SHA-256(label ‖ master ‖ index)`, so
//! a master seed plus a position fully determines the draws regardless of
//! execution order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type SimRng = ChaCha8Rng;

/// `seed_i = hash(master, i)` for ensemble members.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    derive_labeled(master, "", index)
}

/// Seed for a named stage (`"nec"`, `"shots"`, …) and index.
pub fn derive_labeled(master: u64, label: &str, index: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(label.as_bytes());
    h.update([0u8]);
    h.update(master.to_le_bytes());
    h.update(index.to_le_bytes());
    let out = h.finalize();
    u64::from_le_bytes(out[..8].try_into().expect("digest has 32 bytes"))
}

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Hex SHA-256 of arbitrary bytes.
pub fn digest_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
