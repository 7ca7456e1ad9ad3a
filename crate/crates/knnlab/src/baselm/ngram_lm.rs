//! Interpolated Witten-Bell n-gram language model.
//!
//! Each context level mixes its maximum-likelihood estimate with the next
//! shorter context's distribution, weighting the backoff by the number of
//! distinct continuation types seen after the context:
//!
//! ```text
//! p_m(t | c) = (count(c·t) + T(c) · p_{m-1}(t | c')) / (count(c·) + T(c))
//! ```
//!
//! The chain terminates in the uniform distribution 1/|V|, so every token
//! has strictly positive probability and each level sums to exactly 1 in
//! real arithmetic.

use std::collections::HashMap;

use crate::corpus::Corpus;
use crate::error::{Error, Result};

pub const MAX_ORDER: usize = 5;

#[derive(Clone, Debug, Default)]
struct CtxStats {
    cont: HashMap<u32, u64>,
    total: u64,
}

impl CtxStats {
    fn distinct(&self) -> u64 {
        self.cont.len() as u64
    }
}

/// Witten-Bell smoothed n-gram model of a fixed order (1..=5).
#[derive(Clone, Debug)]
pub struct NgramLm {
    order: usize,
    vocab_size: u32,
    root: CtxStats,
    /// levels[m-1]: statistics for contexts of length m (1..order-1).
    levels: Vec<HashMap<Box<[u32]>, CtxStats>>,
}

/// Train a Witten-Bell model. Contexts never cross document boundaries.
pub fn train_ngram_lm(corpus: &Corpus, order: usize) -> Result<NgramLm> {
    if !(1..=MAX_ORDER).contains(&order) {
        return Err(Error::InvalidInput(format!(
            "model order {order} outside 1..={MAX_ORDER}"
        )));
    }
    if corpus.total_tokens() == 0 {
        return Err(Error::InvalidInput(
            "cannot train a language model on an empty corpus".into(),
        ));
    }
    let mut root = CtxStats::default();
    let mut levels: Vec<HashMap<Box<[u32]>, CtxStats>> = vec![HashMap::new(); order - 1];
    for doc in corpus.docs() {
        for (i, &t) in doc.iter().enumerate() {
            *root.cont.entry(t).or_insert(0) += 1;
            root.total += 1;
            for m in 1..order {
                if i >= m {
                    let ctx: Box<[u32]> = Box::from(&doc[i - m..i]);
                    let stats = levels[m - 1].entry(ctx).or_default();
                    *stats.cont.entry(t).or_insert(0) += 1;
                    stats.total += 1;
                }
            }
        }
    }
    Ok(NgramLm { order, vocab_size: corpus.vocab_size(), root, levels })
}

impl NgramLm {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn vocab_size(&self) -> u32 {
        self.vocab_size
    }

    /// p(token | context), using at most the last `order - 1` context tokens.
    ///
    /// Contexts never seen in training fall through to the next shorter
    /// level unchanged.
    pub fn prob(&self, context: &[u32], token: u32) -> f64 {
        let mut p = {
            // Unigram level over the uniform base.
            let cnt = self.root.cont.get(&token).copied().unwrap_or(0);
            let t0 = self.root.distinct();
            let uniform = 1.0 / self.vocab_size as f64;
            (cnt as f64 + t0 as f64 * uniform) / (self.root.total + t0) as f64
        };
        let use_len = context.len().min(self.order - 1);
        let ctx = &context[context.len() - use_len..];
        for m in 1..=use_len {
            let suffix = &ctx[ctx.len() - m..];
            if let Some(stats) = self.levels[m - 1].get(suffix) {
                let cnt = stats.cont.get(&token).copied().unwrap_or(0);
                let t_c = stats.distinct();
                p = (cnt as f64 + t_c as f64 * p) / (stats.total + t_c) as f64;
            }
            // Absent context: keep the shorter-level distribution.
        }
        p
    }

    /// Dense distribution over the whole vocabulary for one context.
    pub fn dist(&self, context: &[u32]) -> Vec<f64> {
        let v = self.vocab_size as usize;
        let mut p = vec![0.0f64; v];
        let t0 = self.root.distinct() as f64;
        let denom0 = self.root.total as f64 + t0;
        let base = t0 * (1.0 / v as f64) / denom0;
        for x in p.iter_mut() {
            *x = base;
        }
        for (&t, &cnt) in &self.root.cont {
            p[t as usize] += cnt as f64 / denom0;
        }
        let use_len = context.len().min(self.order - 1);
        let ctx = &context[context.len() - use_len..];
        for m in 1..=use_len {
            let suffix = &ctx[ctx.len() - m..];
            if let Some(stats) = self.levels[m - 1].get(suffix) {
                let t_c = stats.distinct() as f64;
                let denom = stats.total as f64 + t_c;
                let shrink = t_c / denom;
                for x in p.iter_mut() {
                    *x *= shrink;
                }
                for (&t, &cnt) in &stats.cont {
                    p[t as usize] += cnt as f64 / denom;
                }
            }
        }
        p
    }

    /// Perplexity of this model alone over a corpus (documents scored
    /// independently, contexts reset at document starts).
    pub fn perplexity(&self, corpus: &Corpus) -> f64 {
        let mut ln_sum = 0.0f64;
        let mut n = 0u64;
        for doc in corpus.docs() {
            for (i, &t) in doc.iter().enumerate() {
                ln_sum += self.prob(&doc[..i], t).ln();
                n += 1;
            }
        }
        (-ln_sum / n as f64).exp()
    }
}
