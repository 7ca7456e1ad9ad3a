//! Deterministic context-to-vector encoder.
//!
//! Each token id gets a pseudo-random unit vector derived from a seeded
//! counter hash; a context is encoded as the exponentially decayed average
//! of the embeddings of its last `window` tokens (most recent first):
//!
//! ```text
//! v(c) = sum_{i=1..L} decay^(i-1) * e(c[len-i])  /  sum_{i=1..L} decay^(i-1)
//! ```
//!
//! with `L = min(window, len)`. Everything is computed in f64 with fixed
//! summation order and uses no transcendental functions, so results are
//! bit-identical across platforms; the final key is cast to f32.

use crate::error::{Error, Result};
use crate::util::rng::{counter_hash, hash_to_unit_interval};

/// Configuration and token-embedding source for context keys.
#[derive(Clone, Debug)]
pub struct ContextEncoder {
    dim: usize,
    window: usize,
    decay: f64,
    seed: u64,
}

impl ContextEncoder {
    pub fn new(dim: usize, window: usize, decay: f64, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("encoder dimension must be positive".into()));
        }
        if window == 0 {
            return Err(Error::InvalidInput("encoder window must be positive".into()));
        }
        if !(decay > 0.0 && decay <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "encoder decay must lie in (0, 1], got {decay}"
            )));
        }
        Ok(ContextEncoder { dim, window, decay, seed })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn decay(&self) -> f64 {
        self.decay
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Unit-norm embedding of a single token, in f64.
    pub fn token_embedding(&self, token: u32) -> Vec<f64> {
        let mut e: Vec<f64> = (0..self.dim)
            .map(|j| hash_to_unit_interval(counter_hash(self.seed, token, j as u32)))
            .collect();
        let norm_sq: f64 = e.iter().map(|x| x * x).sum();
        let norm = norm_sq.sqrt();
        if norm > 0.0 {
            for x in e.iter_mut() {
                *x /= norm;
            }
        }
        e
    }

    /// Encode a context into `out` (length must equal `dim`).
    pub fn encode_into(&self, context: &[u32], out: &mut [f32]) {
        assert_eq!(out.len(), self.dim, "output slice has wrong dimension");
        let mut acc = vec![0.0f64; self.dim];
        let weight = accumulate(context, self.window, self.decay, &mut acc, |t| {
            self.token_embedding(t)
        });
        finish(&acc, weight, out);
    }

    pub fn encode(&self, context: &[u32]) -> Vec<f32> {
        let mut out = vec![0.0f32; self.dim];
        self.encode_into(context, &mut out);
        out
    }
}

/// Precomputed per-token embeddings for a fixed vocabulary. Produces keys
/// bit-identical to [`ContextEncoder::encode`].
#[derive(Clone, Debug)]
pub struct EmbeddingTable {
    dim: usize,
    window: usize,
    decay: f64,
    table: Vec<f64>,
}

impl EmbeddingTable {
    pub fn new(encoder: &ContextEncoder, vocab_size: u32) -> Self {
        let dim = encoder.dim();
        let mut table = Vec::with_capacity(vocab_size as usize * dim);
        for t in 0..vocab_size {
            table.extend_from_slice(&encoder.token_embedding(t));
        }
        EmbeddingTable { dim, window: encoder.window(), decay: encoder.decay(), table }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn embedding(&self, token: u32) -> &[f64] {
        let start = token as usize * self.dim;
        &self.table[start..start + self.dim]
    }

    /// Encode a context into `out` (length must equal `dim`). Panics if the
    /// context contains a token id outside the precomputed vocabulary.
    pub fn encode_into(&self, context: &[u32], out: &mut [f32]) {
        assert_eq!(out.len(), self.dim, "output slice has wrong dimension");
        let mut acc = vec![0.0f64; self.dim];
        let weight = accumulate(context, self.window, self.decay, &mut acc, |t| {
            self.embedding(t).to_vec()
        });
        finish(&acc, weight, out);
    }

    pub fn encode(&self, context: &[u32]) -> Vec<f32> {
        let mut out = vec![0.0f32; self.dim];
        self.encode_into(context, &mut out);
        out
    }
}

/// Shared weighted-suffix accumulation: most recent token first, fixed
/// iteration order. Returns the total weight (0 for an empty context).
fn accumulate<F: FnMut(u32) -> Vec<f64>>(
    context: &[u32],
    window: usize,
    decay: f64,
    acc: &mut [f64],
    mut embed: F,
) -> f64 {
    let len = context.len().min(window);
    let mut w = 1.0f64;
    let mut total = 0.0f64;
    for i in 1..=len {
        let e = embed(context[context.len() - i]);
        for (a, x) in acc.iter_mut().zip(e.iter()) {
            *a += w * x;
        }
        total += w;
        w *= decay;
    }
    total
}

fn finish(acc: &[f64], weight: f64, out: &mut [f32]) {
    if weight > 0.0 {
        for (o, a) in out.iter_mut().zip(acc.iter()) {
            *o = (a / weight) as f32;
        }
    } else {
        for o in out.iter_mut() {
            *o = 0.0;
        }
    }
}
