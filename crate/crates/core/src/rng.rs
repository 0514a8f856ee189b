//! Seed derivation for reproducible, order-independent experiment trials.
//!
//! Every random stream is a `ChaCha8Rng` seeded from a 64-bit value. Derived
//! seeds are the first eight bytes (little endian) of the SHA-256 digest of
//! the master seed followed by each labelled component, so a trial's stream
//! depends only on its coordinates, never on execution order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// One component of a derived seed.
#[derive(Debug, Clone, Copy)]
pub enum SeedPart<'a> {
    Label(&'a str),
    Index(u64),
}

/// `sha256(master ‖ parts…)[..8]` as a little-endian `u64`.
///
/// The master seed and indices are hashed as 8-byte little-endian integers;
/// labels as their UTF-8 bytes followed by a zero byte.
pub fn derive_seed(master: u64, parts: &[SeedPart<'_>]) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    for part in parts {
        match part {
            SeedPart::Label(s) => {
                hasher.update(s.as_bytes());
                hasher.update([0u8]);
            }
            SeedPart::Index(i) => hasher.update(i.to_le_bytes()),
        }
    }
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

pub fn stream(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
