//! Deterministic seed derivation.
//!
//! Every random stream in the crate descends from a single root seed
//! through a path of string labels. The derivation rule is fixed:
//!
//! ```text
//! derived = LE64( SHA-256( LE64(root) || label_0 || 0x1F || label_1 || 0x1F || ... )[0..8] )
//! ```
//!
//! i.e. the first eight bytes, little endian, of the SHA-256 digest over
//! the little-endian root seed followed by the unit-separator-joined
//! label path. Streams derived from distinct paths are independent for
//! all practical purposes, and the rule is stable across platforms, so
//! any consumer (including one in another language) can reproduce a
//! stream from the manifest's root seed alone.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Derive a child seed from a root seed and a label path.
pub fn derive_seed(root: u64, path: &[&str]) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(root.to_le_bytes());
    for label in path {
        hasher.update(label.as_bytes());
        hasher.update([0x1f]);
    }
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest length"))
}

/// Seeded ChaCha8 stream for a label path.
pub fn stream(root: u64, path: &[&str]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(root, path))
}

/// Convenience for per-sample substreams: appends the decimal index as a
/// final label.
pub fn indexed_stream(root: u64, path: &[&str], index: usize) -> ChaCha8Rng {
    let idx = index.to_string();
    let mut full: Vec<&str> = path.to_vec();
    full.push(&idx);
    stream(root, &full)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn derivation_is_deterministic() {
        assert_eq!(derive_seed(42, &["a", "b"]), derive_seed(42, &["a", "b"]));
        assert_ne!(derive_seed(42, &["a", "b"]), derive_seed(42, &["a", "c"]));
        assert_ne!(derive_seed(42, &["a", "b"]), derive_seed(43, &["a", "b"]));
    }

    #[test]
    fn label_boundaries_matter() {
        // ["ab", "c"] and ["a", "bc"] must not collide.
        assert_ne!(derive_seed(7, &["ab", "c"]), derive_seed(7, &["a", "bc"]));
    }

    #[test]
    fn streams_from_equal_paths_agree() {
        let mut a = stream(5, &["generate", "source"]);
        let mut b = stream(5, &["generate", "source"]);
        for _ in 0..16 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }
}
