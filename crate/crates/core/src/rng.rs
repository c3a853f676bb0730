//! Reproducible randomness: a master seed plus a hierarchical stream path.
//!
//! Every stochastic operation takes an [`RngContract`] naming its stream,
//! e.g. `experiment/replicate-3/chain`. Identical `(seed, path)` pairs yield
//! identical draw sequences; distinct paths yield independent ChaCha streams,
//! so replicates can run in any order (or in parallel) without changing
//! results.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};

/// A named, reproducible source of randomness.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RngContract {
    master_seed: u64,
    stream_id: String,
}

impl RngContract {
    pub fn new(master_seed: u64, stream_id: impl Into<String>) -> Self {
        Self {
            master_seed,
            stream_id: stream_id.into(),
        }
    }

    /// Root contract with an empty stream path.
    pub fn root(master_seed: u64) -> Self {
        Self::new(master_seed, "")
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_id(&self) -> &str {
        &self.stream_id
    }

    /// Child stream `<self>/<segment>`.
    pub fn child(&self, segment: impl AsRef<str>) -> Self {
        let sep = if self.stream_id.is_empty() { "" } else { "/" };
        Self {
            master_seed: self.master_seed,
            stream_id: format!("{}{}{}", self.stream_id, sep, segment.as_ref()),
        }
    }

    /// Instantiate the stream. The generator is seeded from
    /// SHA-256(master_seed || stream_id), so streams with distinct paths are
    /// independent for all practical purposes.
    pub fn rng(&self) -> ChaCha12Rng {
        let mut hasher = Sha256::new();
        hasher.update(self.master_seed.to_le_bytes());
        hasher.update(self.stream_id.as_bytes());
        let digest = hasher.finalize();
        let mut seed = [0u8; 32];
        seed.copy_from_slice(&digest);
        ChaCha12Rng::from_seed(seed)
    }
}
