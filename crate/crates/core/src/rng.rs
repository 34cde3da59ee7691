//! Counter-style random stream derivation.
//!
//! A stream is identified by a master seed and a path of indices such as
//! `[replication, dictionary]`. The ChaCha key is a SHA-256 digest of the
//! pair, so any two distinct paths give unrelated generators and the same
//! pair always reproduces the same sequence, whatever thread draws it.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

const DOMAIN: &[u8] = b"rlass0.rng-stream.v1";

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub master_seed: u64,
    pub path: Vec<u64>,
}

impl RngStream {
    pub fn new(master_seed: u64) -> Self {
        Self {
            master_seed,
            path: Vec::new(),
        }
    }

    pub fn with_path(master_seed: u64, path: &[u64]) -> Self {
        Self {
            master_seed,
            path: path.to_vec(),
        }
    }

    /// Stream one level deeper: `path ++ [index]`.
    pub fn child(&self, index: u64) -> Self {
        let mut path = self.path.clone();
        path.push(index);
        Self {
            master_seed: self.master_seed,
            path,
        }
    }

    pub fn key(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(DOMAIN);
        h.update(self.master_seed.to_le_bytes());
        h.update((self.path.len() as u64).to_le_bytes());
        for idx in &self.path {
            h.update(idx.to_le_bytes());
        }
        h.finalize().into()
    }

    /// A 64-bit seed derived from this stream, for APIs that take a plain seed.
    pub fn derive_seed(&self) -> u64 {
        let k = self.key();
        u64::from_le_bytes(k[..8].try_into().expect("8 bytes"))
    }

    pub fn rng(&self) -> ChaCha12Rng {
        ChaCha12Rng::from_seed(self.key())
    }
}
