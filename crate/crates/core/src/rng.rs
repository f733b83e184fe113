//! Deterministic random streams keyed by a master seed and a cell label.
//!
//! Every stream is a ChaCha generator whose seed is the SHA-256 digest of
//! the master seed and a textual identifier, so a stream's output depends
//! only on its identifier and never on the order in which cells run.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha8Rng;

pub fn stream(master_seed: u64, id: &str) -> StreamRng {
    let mut hasher = Sha256::new();
    hasher.update(master_seed.to_le_bytes());
    hasher.update(id.as_bytes());
    let digest: [u8; 32] = hasher.finalize().into();
    ChaCha8Rng::from_seed(digest)
}

/// Inverse-CDF draw from a discrete distribution given as probabilities.
///
/// Falls back to the last index with positive mass when rounding leaves
/// the cumulative sum a hair below the uniform draw.
pub fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}
