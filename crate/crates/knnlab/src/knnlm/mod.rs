//! Retrieval-augmented language modeling: datastore construction, the
//! distance-softmax neighbor distribution, interpolation with the base
//! model, and perplexity evaluation.

mod eval;
mod io;
mod prob;

pub use eval::{eval_ppl, EvalOutput, EvalRecord, RECORDS_HEADER};
pub use io::{
    read_datastore_file, read_records_csv, write_datastore_file, write_records_csv,
    DATASTORE_MAGIC,
};
pub use prob::{interpolate, interpolate_point, knn_prob, SparseProb};

use crate::baselm::{ContextEncoder, EmbeddingTable};
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::util::Matrix;

/// Retrieval and interpolation parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct KnnConfig {
    /// Neighbors fetched per query.
    pub k: usize,
    /// Softmax temperature over squared distances; > 0.
    pub tau: f64,
    /// Weight of the neighbor distribution in the interpolation; in [0, 1].
    pub lambda: f64,
    /// Inverted lists probed per query (ignored by exact search).
    pub nprobe: usize,
    /// Re-rank quantized candidates by exact distance before scoring.
    pub exact_rescore: bool,
}

impl Default for KnnConfig {
    fn default() -> Self {
        KnnConfig { k: 1024, tau: 10.0, lambda: 0.25, nprobe: 32, exact_rescore: false }
    }
}

impl KnnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("knn.k must be at least 1".into()));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::Config(format!("knn.tau must be finite and > 0, got {}", self.tau)));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::Config(format!("knn.lambda must be in [0, 1], got {}", self.lambda)));
        }
        if self.nprobe == 0 {
            return Err(Error::Config("knn.nprobe must be at least 1".into()));
        }
        Ok(())
    }
}

/// One key-value pair per token position of a corpus: the key encodes the
/// in-document context before the position, the value is the token at it.
#[derive(Clone, Debug)]
pub struct Datastore {
    keys: Matrix,
    values: Vec<u32>,
    vocab_size: u32,
    /// Hash of the source corpus; None when loaded from a file (the disk
    /// format does not carry it).
    source_hash: Option<u64>,
}

impl Datastore {
    pub fn from_parts(keys: Matrix, values: Vec<u32>, vocab_size: u32) -> Result<Datastore> {
        if keys.rows() != values.len() {
            return Err(Error::Data(format!(
                "datastore has {} keys but {} values",
                keys.rows(),
                values.len()
            )));
        }
        if let Some(&v) = values.iter().find(|&&v| v >= vocab_size) {
            return Err(Error::Data(format!(
                "datastore value {v} outside vocabulary of size {vocab_size}"
            )));
        }
        Ok(Datastore { keys, values, vocab_size, source_hash: None })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.keys.dim()
    }

    pub fn keys(&self) -> &Matrix {
        &self.keys
    }

    pub fn values(&self) -> &[u32] {
        &self.values
    }

    pub fn vocab_size(&self) -> u32 {
        self.vocab_size
    }

    pub fn source_hash(&self) -> Option<u64> {
        self.source_hash
    }
}

/// Build the datastore for a corpus: one entry per token position, keys
/// encoded from the context inside the same document only (document-
/// initial positions get the empty-context key).
pub fn build_datastore(corpus: &Corpus, encoder: &ContextEncoder) -> Datastore {
    let table = EmbeddingTable::new(encoder, corpus.vocab_size());
    let dim = encoder.dim();
    let mut keys = Matrix::with_capacity(dim, corpus.total_tokens() as usize);
    let mut values = Vec::with_capacity(corpus.total_tokens() as usize);
    let mut key = vec![0.0f32; dim];
    for doc in corpus.docs() {
        for (i, &t) in doc.iter().enumerate() {
            table.encode_into(&doc[..i], &mut key);
            keys.push_row(&key);
            values.push(t);
        }
    }
    Datastore { keys, values, vocab_size: corpus.vocab_size(), source_hash: Some(corpus.hash()) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::count_tokens;

    fn encoder() -> ContextEncoder {
        ContextEncoder::new(16, 4, 0.7, 7).unwrap()
    }

    #[test]
    fn single_token_corpus() {
        let corpus = Corpus::new(vec![vec![5]], 6).unwrap();
        let ds = build_datastore(&corpus, &encoder());
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.values(), &[5]);
        assert!(ds.keys().row(0).iter().all(|&x| x == 0.0), "empty context must encode to zero");
    }

    #[test]
    fn one_entry_per_position_with_matching_counts() {
        let corpus =
            Corpus::new(vec![vec![1, 2, 1], vec![3, 3, 3, 1], vec![], vec![2]], 4).unwrap();
        let ds = build_datastore(&corpus, &encoder());
        assert_eq!(ds.len() as u64, corpus.total_tokens());
        // Value histogram equals the corpus token histogram.
        let freq = count_tokens(&corpus);
        let mut got = vec![0u64; 4];
        for &v in ds.values() {
            got[v as usize] += 1;
        }
        assert_eq!(&got, freq.counts());
    }

    #[test]
    fn contexts_reset_at_document_starts() {
        let corpus = Corpus::new(vec![vec![1, 2, 3], vec![1, 2, 3]], 4).unwrap();
        let ds = build_datastore(&corpus, &encoder());
        // Positions 0..3 and 3..6 see identical in-document contexts.
        for i in 0..3 {
            assert_eq!(ds.keys().row(i), ds.keys().row(i + 3), "position {i}");
        }
    }

    #[test]
    fn from_parts_validates() {
        let mut keys = Matrix::new(4);
        keys.push_row(&[0.0; 4]);
        assert!(Datastore::from_parts(keys.clone(), vec![1, 2], 5).is_err());
        assert!(Datastore::from_parts(keys.clone(), vec![9], 5).is_err());
        assert!(Datastore::from_parts(keys, vec![4], 5).is_ok());
    }

    #[test]
    fn config_validation() {
        assert!(KnnConfig::default().validate().is_ok());
        assert!(KnnConfig { k: 0, ..KnnConfig::default() }.validate().is_err());
        assert!(KnnConfig { tau: 0.0, ..KnnConfig::default() }.validate().is_err());
        assert!(KnnConfig { tau: f64::NAN, ..KnnConfig::default() }.validate().is_err());
        assert!(KnnConfig { lambda: 1.1, ..KnnConfig::default() }.validate().is_err());
        assert!(KnnConfig { lambda: -0.1, ..KnnConfig::default() }.validate().is_err());
        assert!(KnnConfig { nprobe: 0, ..KnnConfig::default() }.validate().is_err());
    }
}
