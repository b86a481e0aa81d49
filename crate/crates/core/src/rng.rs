//! Seed derivation and path-keyed random streams.
//!
//! Every stochastic component draws from a ChaCha8 stream selected by a key
//! derived from the top-level seed and a label, and a stream index (restart,
//! column, Monte Carlo path). A path's draws therefore depend only on
//! `(seed, label, index)`, never on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Derives a 64-bit child seed from `root`, a component label and an index.
pub fn derive_seed(root: u64, label: &str, index: u64) -> u64 {
    let digest = Sha256::new()
        .chain_update(root.to_le_bytes())
        .chain_update(label.as_bytes())
        .chain_update([0u8])
        .chain_update(index.to_le_bytes())
        .finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

/// Key for a family of independent streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamKey([u8; 32]);

impl StreamKey {
    pub fn new(seed: u64, label: &str) -> Self {
        let digest = Sha256::new()
            .chain_update(seed.to_le_bytes())
            .chain_update(label.as_bytes())
            .finalize();
        StreamKey(digest.into())
    }

    /// Generator for stream `index`, positioned at its start.
    pub fn stream(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.0);
        rng.set_stream(index);
        rng
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let key = StreamKey::new(7, "paths");
        let a: u64 = key.stream(3).random();
        let b: u64 = key.stream(3).random();
        let c: u64 = key.stream(4).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(StreamKey::new(7, "paths"), StreamKey::new(7, "louvain"));
    }

    #[test]
    fn derived_seeds_depend_on_every_part() {
        let s = derive_seed(1, "detect", 0);
        assert_eq!(s, derive_seed(1, "detect", 0));
        assert_ne!(s, derive_seed(2, "detect", 0));
        assert_ne!(s, derive_seed(1, "detect", 1));
        assert_ne!(s, derive_seed(1, "detecT", 0));
    }
}
