//! Seed fan-out.
//!
//! One user-facing seed is expanded into independent per-stage and per-item
//! streams through a labeled hash, so any stage can be re-run on its own and
//! still reproduce the values it produced inside a full pipeline run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Derive a child seed from `(parent, label, index)`.
pub fn derive(parent: u64, label: &str, index: u64) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(parent.to_le_bytes());
    hasher.update((label.len() as u64).to_le_bytes());
    hasher.update(label.as_bytes());
    hasher.update(index.to_le_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

/// A deterministic generator for the derived stream.
pub fn rng(parent: u64, label: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(parent, label, index))
}

/// Hex SHA-256 of a byte stream; used for corpus and report fingerprints.
pub fn fingerprint(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
