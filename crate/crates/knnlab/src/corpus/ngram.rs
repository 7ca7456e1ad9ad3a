//! N-gram counting, document rarity scoring, and per-position context
//! frequency lookups.

use std::collections::HashMap;

use super::Corpus;
use crate::error::{Error, Result};

/// Counts of length-`n` token windows, accumulated per document.
#[derive(Clone, Debug)]
pub struct NGramTable {
    n: usize,
    counts: HashMap<Box<[u32]>, u64>,
    total: u64,
}

impl NGramTable {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn count(&self, gram: &[u32]) -> u64 {
        debug_assert_eq!(gram.len(), self.n);
        self.counts.get(gram).copied().unwrap_or(0)
    }

    /// Total n-gram occurrences (sum over all windows of all documents).
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn distinct(&self) -> usize {
        self.counts.len()
    }
}

/// Count all length-`n` windows, never crossing document boundaries.
pub fn count_ngrams(corpus: &Corpus, n: usize) -> Result<NGramTable> {
    if n == 0 {
        return Err(Error::InvalidInput("n-gram order must be positive".into()));
    }
    let mut counts: HashMap<Box<[u32]>, u64> = HashMap::new();
    let mut total = 0u64;
    for doc in corpus.docs() {
        for w in doc.windows(n) {
            *counts.entry(Box::from(w)).or_insert(0) += 1;
            total += 1;
        }
    }
    Ok(NGramTable { n, counts, total })
}

/// Fraction of a document's n-gram occurrences that are corpus-hapax
/// (corpus count exactly 1), averaged over the orders whose windows the
/// document is long enough to contain.
///
/// `tables` holds corpus-wide tables for consecutive orders beginning at 1
/// (conventionally 1..=4), built over the full corpus including this
/// document. An empty document scores 0.
pub fn rare_ngram_ratio(doc: &[u32], tables: &[NGramTable]) -> f64 {
    let mut acc = 0.0;
    let mut used = 0u32;
    for table in tables {
        let n = table.n();
        if doc.len() < n {
            continue;
        }
        let occ = doc.len() - n + 1;
        let hapax = doc.windows(n).filter(|w| table.count(w) == 1).count();
        acc += hapax as f64 / occ as f64;
        used += 1;
    }
    if used == 0 {
        0.0
    } else {
        acc / used as f64
    }
}

/// For every position of every document (document order, then position
/// order), the training count of the n-gram that immediately precedes it.
///
/// Positions with fewer than `n` predecessors report the count of the longest
/// available prefix; position 0 (no context at all) reports 0. `tables` must
/// hold orders 1..=n_max with `n <= n_max`.
pub fn context_ngram_frequency(test: &Corpus, tables: &[NGramTable], n: usize) -> Result<Vec<u64>> {
    if n == 0 || n > tables.len() {
        return Err(Error::InvalidInput(format!(
            "context n-gram order {n} outside 1..={}",
            tables.len()
        )));
    }
    for (i, t) in tables.iter().enumerate() {
        if t.n() != i + 1 {
            return Err(Error::InvalidInput(
                "context tables must cover consecutive orders starting at 1".into(),
            ));
        }
    }
    let mut out = Vec::with_capacity(test.total_tokens() as usize);
    for doc in test.docs() {
        for t in 0..doc.len() {
            let m = n.min(t);
            if m == 0 {
                out.push(0);
            } else {
                out.push(tables[m - 1].count(&doc[t - m..t]));
            }
        }
    }
    Ok(out)
}
