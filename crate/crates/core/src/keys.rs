//! Keyed random streams.
//!
//! Every random draw in the crate comes from a generator seeded by hashing a
//! structured key (seed, domain tag, indices, box ids). Results therefore do
//! not depend on draw order or thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Builder for a hashed key. Parts are length-prefixed so `("ab","c")` and
/// `("a","bc")` never collide.
#[derive(Clone)]
pub struct KeyBuilder {
    hasher: Sha256,
}

impl KeyBuilder {
    pub fn new(domain: &str) -> Self {
        let mut kb = KeyBuilder {
            hasher: Sha256::new(),
        };
        kb.push_bytes(domain.as_bytes());
        kb
    }

    pub fn push_bytes(&mut self, bytes: &[u8]) -> &mut Self {
        self.hasher.update((bytes.len() as u64).to_le_bytes());
        self.hasher.update(bytes);
        self
    }

    pub fn u64(mut self, v: u64) -> Self {
        self.push_bytes(&v.to_le_bytes());
        self
    }

    pub fn str(mut self, s: &str) -> Self {
        self.push_bytes(s.as_bytes());
        self
    }

    pub fn strs<S: AsRef<str>>(mut self, items: &[S]) -> Self {
        self.push_bytes(&(items.len() as u64).to_le_bytes());
        for s in items {
            self.push_bytes(s.as_ref().as_bytes());
        }
        self
    }

    pub fn digest(self) -> [u8; 32] {
        self.hasher.finalize().into()
    }

    pub fn seed(self) -> u64 {
        let d = self.digest();
        u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
    }

    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::from_seed(self.digest())
    }
}

/// Hex SHA-256 of arbitrary bytes; used for cache keys and fixture digests.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
