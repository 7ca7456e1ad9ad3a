//! Corpus handling: tokenization, vocabulary, token/n-gram statistics,
//! rarity-driven resplitting, and the on-disk corpus formats.

mod io;
mod ngram;
mod resplit;
mod text;

pub use io::{
    read_corpus_file, read_freq_tsv, read_text_documents, read_vocab_file, write_corpus_file,
    write_freq_tsv, write_vocab_file, CORPUS_MAGIC,
};
pub use ngram::{context_ngram_frequency, count_ngrams, rare_ngram_ratio, NGramTable};
pub use resplit::{resplit, SplitResult};
pub use text::{build_vocab, corpus_from_tokens, tokenize, Vocabulary, UNK};

use crate::error::{Error, Result};
use crate::util::rng::mix64;

/// A tokenized corpus: documents of token ids over a fixed vocabulary size.
///
/// Nothing ever crosses a document boundary: not n-grams, not encoder
/// contexts, not datastore entries.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Corpus {
    docs: Vec<Vec<u32>>,
    vocab_size: u32,
}

impl Corpus {
    pub fn new(docs: Vec<Vec<u32>>, vocab_size: u32) -> Result<Self> {
        for (i, doc) in docs.iter().enumerate() {
            if let Some(&bad) = doc.iter().find(|&&t| t >= vocab_size) {
                return Err(Error::InvalidInput(format!(
                    "document {i} contains token id {bad} >= vocab size {vocab_size}"
                )));
            }
        }
        Ok(Corpus { docs, vocab_size })
    }

    pub fn vocab_size(&self) -> u32 {
        self.vocab_size
    }

    pub fn n_docs(&self) -> usize {
        self.docs.len()
    }

    pub fn doc(&self, i: usize) -> &[u32] {
        &self.docs[i]
    }

    pub fn docs(&self) -> &[Vec<u32>] {
        &self.docs
    }

    pub fn total_tokens(&self) -> u64 {
        self.docs.iter().map(|d| d.len() as u64).sum()
    }

    /// Order-sensitive content hash (vocab size, doc lengths, token ids).
    pub fn hash(&self) -> u64 {
        let mut h = mix64(0x6b6e_6e6c_6162u64 ^ self.vocab_size as u64);
        for doc in &self.docs {
            h = mix64(h ^ doc.len() as u64);
            for &t in doc {
                h = mix64(h ^ t as u64);
            }
        }
        h
    }
}

/// Per-type token counts plus the total, indexable by token id.
///
/// Lookups beyond the stored range return 0, so tables built over different
/// vocabularies (e.g. an imported pre-training table) stay usable.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FrequencyTable {
    counts: Vec<u64>,
    total: u64,
}

impl FrequencyTable {
    pub fn from_counts(counts: Vec<u64>) -> Self {
        let total = counts.iter().sum();
        FrequencyTable { counts, total }
    }

    pub fn count(&self, token: u32) -> u64 {
        self.counts.get(token as usize).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }
}

/// Count every token occurrence in the corpus, including UNK.
pub fn count_tokens(corpus: &Corpus) -> FrequencyTable {
    let mut counts = vec![0u64; corpus.vocab_size() as usize];
    for doc in corpus.docs() {
        for &t in doc {
            counts[t as usize] += 1;
        }
    }
    FrequencyTable::from_counts(counts)
}
