//! Reproducible random streams.
//!
//! A stream is identified by a master seed and a label path such as
//! `"bs_call/train/step/17/points"`. The generator state is a pure function
//! of that pair, so children derived with [`RngStream::split`] do not depend
//! on how far the parent has been advanced, and re-running an experiment
//! with the same seed replays every draw bit for bit.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sha2::{Digest, Sha256};

#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    label: String,
    rng: ChaCha8Rng,
}

fn derive_key(seed: u64, label: &str) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(label.as_bytes());
    let digest = hasher.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    key
}

impl RngStream {
    pub fn new(seed: u64, label: impl Into<String>) -> Self {
        let label = label.into();
        let rng = ChaCha8Rng::from_seed(derive_key(seed, &label));
        Self { seed, label, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Child stream labelled `parent/child`. Depends only on the master seed
    /// and the full label path, never on the parent's position.
    pub fn split(&self, child: &str) -> RngStream {
        let label = if self.label.is_empty() { child.to_string() } else { format!("{}/{}", self.label, child) };
        RngStream::new(self.seed, label)
    }

    pub fn split_indexed(&self, child: &str, index: u64) -> RngStream {
        self.split(&format!("{child}/{index}"))
    }

    pub fn normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    pub fn standard_normal(&mut self, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n];
        self.fill_standard_normal(&mut out);
        out
    }

    pub fn fill_standard_normal(&mut self, out: &mut [f64]) {
        for x in out.iter_mut() {
            *x = self.rng.sample(StandardNormal);
        }
    }

    /// Uniform draw on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Uniform draw on the closed interval `[lo, hi]` (the upper end has
    /// probability zero but degenerate intervals return `lo`).
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Position of the underlying block cipher, in 32-bit words.
    pub fn word_pos(&self) -> u128 {
        self.rng.get_word_pos()
    }

    pub fn set_word_pos(&mut self, pos: u128) {
        self.rng.set_word_pos(pos);
    }
}
