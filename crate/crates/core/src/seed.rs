//! Labeled sub-seed derivation.
//!
//! A sub-seed is the first eight bytes (little endian) of
//! `SHA-256("engage-rank/seed/v1" || master_le_bytes || for each label: len_le_u32 || label_bytes)`.
//! Length prefixes keep `["ab", "c"]` and `["a", "bc"]` apart.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

const DOMAIN: &[u8] = b"engage-rank/seed/v1";

pub fn derive_seed(master: u64, labels: &[&str]) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(DOMAIN);
    hasher.update(master.to_le_bytes());
    for label in labels {
        hasher.update((label.len() as u32).to_le_bytes());
        hasher.update(label.as_bytes());
    }
    let digest = hasher.finalize();
    let mut head = [0u8; 8];
    head.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(head)
}

pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
