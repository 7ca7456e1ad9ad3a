//! The base language model and the context encoder.
//!
//! The retrieval pipeline needs two things from this layer: a smoothed
//! next-token distribution to interpolate against, and a deterministic map
//! from token contexts to fixed-dimensional key vectors.

mod encoder;
mod ngram_lm;

pub use encoder::{ContextEncoder, EmbeddingTable};
pub use ngram_lm::{train_ngram_lm, NgramLm};

/// Next-token probability source used by evaluation. Implementations must
/// return strictly positive probabilities that sum to 1 over the
/// vocabulary for any context.
pub trait LanguageModel: Sync {
    fn vocab_size(&self) -> u32;
    /// p(token | context); the context may be arbitrarily long, the model
    /// uses whatever suffix it conditions on.
    fn prob(&self, context: &[u32], token: u32) -> f64;
}

impl LanguageModel for NgramLm {
    fn vocab_size(&self) -> u32 {
        NgramLm::vocab_size(self)
    }

    fn prob(&self, context: &[u32], token: u32) -> f64 {
        NgramLm::prob(self, context, token)
    }
}
