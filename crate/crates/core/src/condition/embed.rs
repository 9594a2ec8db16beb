use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::Modality;
use crate::error::{Error, Result};

/// Turns raw condition input into a row-major `L × width` token matrix.
///
/// Implement this to plug in a real encoder; the denoiser only relies on the
/// output width matching `10 × latent_dim`.
pub trait Embedder {
    fn width(&self) -> usize;

    fn embed(&self, raw: &[u8], modality: Modality) -> Result<Array2<f64>>;
}

/// Deterministic hashing embedder. Input bytes are split into fixed-size
/// chunks; each chunk becomes one token whose values are drawn from a stream
/// seeded by the SHA-256 of `(seed, modality, row, chunk)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EmbedderStub {
    pub seed: u64,
    pub width: usize,
    pub chunk_size: usize,
    pub max_tokens: usize,
}

impl EmbedderStub {
    pub fn new(seed: u64, width: usize) -> Self {
        Self {
            seed,
            width,
            chunk_size: 16,
            max_tokens: 64,
        }
    }
}

impl Embedder for EmbedderStub {
    fn width(&self) -> usize {
        self.width
    }

    fn embed(&self, raw: &[u8], modality: Modality) -> Result<Array2<f64>> {
        if raw.is_empty() {
            return Err(Error::Validation("cannot embed empty input".into()));
        }
        let rows = raw.len().div_ceil(self.chunk_size).min(self.max_tokens);
        let mut out = Array2::zeros((rows, self.width));
        for (r, chunk) in raw.chunks(self.chunk_size).take(rows).enumerate() {
            let mut h = Sha256::new();
            h.update(self.seed.to_le_bytes());
            h.update(modality.name().as_bytes());
            h.update((r as u64).to_le_bytes());
            h.update(chunk);
            let digest: [u8; 32] = h.finalize().into();
            let mut stream = ChaCha8Rng::from_seed(digest);
            for v in out.row_mut(r) {
                *v = stream.random_range(-1.0..=1.0);
            }
        }
        Ok(out)
    }
}
