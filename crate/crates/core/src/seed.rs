//! Stable seed derivation.
//!
//! Every random choice in the crate flows from an explicit `u64` seed. Child
//! seeds are derived by hashing the parent seed together with a tag and an
//! index, so adding a new consumer never perturbs existing streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type Rng = ChaCha8Rng;

/// Derive a child seed from `(parent, tag, index)`.
pub fn derive(parent: u64, tag: &str, index: u64) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(parent.to_le_bytes());
    hasher.update((tag.len() as u64).to_le_bytes());
    hasher.update(tag.as_bytes());
    hasher.update(index.to_le_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

/// Derive a child seed keyed by a string (e.g. an example id).
pub fn derive_str(parent: u64, tag: &str, key: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(parent.to_le_bytes());
    hasher.update((tag.len() as u64).to_le_bytes());
    hasher.update(tag.as_bytes());
    hasher.update(key.as_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivation_is_stable_and_separates_streams() {
        assert_eq!(derive(7, "restart", 0), derive(7, "restart", 0));
        assert_ne!(derive(7, "restart", 0), derive(7, "restart", 1));
        assert_ne!(derive(7, "restart", 0), derive(7, "split", 0));
        assert_ne!(derive(7, "restart", 0), derive(8, "restart", 0));
        assert_ne!(derive_str(1, "a", "x"), derive_str(1, "a", "y"));
    }
}
