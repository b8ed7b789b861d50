//! Stable seed derivation.
//!
//! Every random stream in the pipeline is keyed by a global seed plus a
//! label (a record id, a step number, a pair index), so results never depend
//! on worker count or processing order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Derive a 64-bit seed from a parent seed and a byte label.
pub fn derive(seed: u64, label: &[u8]) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update((label.len() as u64).to_le_bytes());
    hasher.update(label);
    let digest = hasher.finalize();
    let mut out = [0u8; 8];
    out.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(out)
}

pub fn derive_str(seed: u64, label: &str) -> u64 {
    derive(seed, label.as_bytes())
}

pub fn derive_index(seed: u64, tag: &str, index: u64) -> u64 {
    let mut label = Vec::with_capacity(tag.len() + 8);
    label.extend_from_slice(tag.as_bytes());
    label.extend_from_slice(&index.to_le_bytes());
    derive(seed, &label)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Hex SHA-256 of a byte slice, used for content hashes in run manifests.
pub fn content_hash(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivation_is_stable_and_label_sensitive() {
        assert_eq!(derive_str(7, "a"), derive_str(7, "a"));
        assert_ne!(derive_str(7, "a"), derive_str(7, "b"));
        assert_ne!(derive_str(7, "a"), derive_str(8, "a"));
        assert_ne!(derive_index(1, "x", 0), derive_index(1, "x", 1));
    }

    #[test]
    fn content_hash_known_value() {
        assert_eq!(
            content_hash(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }
}
