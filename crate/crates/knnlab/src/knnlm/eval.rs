//! Perplexity evaluation with per-position diagnostic records.

use rayon::prelude::*;

use super::{interpolate_point, knn_prob, KnnConfig};
use crate::baselm::{EmbeddingTable, LanguageModel};
use crate::corpus::{context_ngram_frequency, Corpus, FrequencyTable, NGramTable};
use crate::error::{Error, Result};
use crate::vindex::NeighborSearch;

pub const RECORDS_HEADER: &str = "position,target_id,freq_datastore,freq_pretrain,p_lm,p_knn,\
p_interp,hit,ctx_ngram_count_n1,ctx_ngram_count_n2,ctx_ngram_count_n3,ctx_ngram_count_n4,\
ctx_ngram_count_n5";

/// Everything recorded about one scored test position.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalRecord {
    /// Global position index over the test corpus (documents in order).
    pub position: u64,
    pub target_id: u32,
    /// Target-type count in the datastore source corpus.
    pub freq_datastore: u64,
    /// Target-type count in the base model's training corpus.
    pub freq_pretrain: u64,
    /// Base-model probability of the target.
    pub p_lm: f64,
    /// Neighbor-distribution probability of the target (0 on a miss).
    pub p_knn: f64,
    /// Interpolated probability actually scored.
    pub p_interp: f64,
    /// Whether any retrieved neighbor's value equals the target.
    pub hit: bool,
    /// Count of the last-n context tokens as an n-gram in the datastore
    /// corpus, for n = 1..=5 (shorter prefixes use the shorter order).
    pub ctx_ngram_counts: [u64; 5],
}

#[derive(Clone, Debug)]
pub struct EvalOutput {
    pub ppl_base: f64,
    pub ppl_knnlm: f64,
    pub records: Vec<EvalRecord>,
}

/// Score every test position with the base model and the interpolated
/// model.
///
/// Positions are scored independently (in parallel) and reduced in
/// position order, so output is deterministic. Contexts reset at document
/// boundaries. With `lambda = 1` a position where no neighbor carries the
/// target has probability 0 and the perplexity is reported as infinite.
pub fn eval_ppl<L: LanguageModel, S: NeighborSearch + Sync + ?Sized>(
    lm: &L,
    searcher: &S,
    encoder: &EmbeddingTable,
    config: &KnnConfig,
    test: &Corpus,
    freq_datastore: &FrequencyTable,
    freq_pretrain: &FrequencyTable,
    context_tables: &[NGramTable],
) -> Result<EvalOutput> {
    config.validate()?;
    if test.total_tokens() == 0 {
        return Err(Error::InvalidInput("test corpus has no tokens to score".into()));
    }
    if test.vocab_size() != lm.vocab_size() {
        return Err(Error::InvalidInput(format!(
            "vocabulary mismatch: test corpus has {} types, model has {}",
            test.vocab_size(),
            lm.vocab_size()
        )));
    }
    // Per-position context n-gram counts, n = 1..=5, zeros when no tables
    // were supplied.
    let total = test.total_tokens() as usize;
    let mut ngram_counts: Vec<[u64; 5]> = vec![[0; 5]; total];
    for n in 1..=5usize.min(context_tables.len()) {
        let col = context_ngram_frequency(test, context_tables, n)?;
        for (row, &c) in ngram_counts.iter_mut().zip(col.iter()) {
            row[n - 1] = c;
        }
    }

    let positions: Vec<(usize, usize)> = test
        .docs()
        .iter()
        .enumerate()
        .flat_map(|(d, doc)| (0..doc.len()).map(move |i| (d, i)))
        .collect();

    let records: Vec<EvalRecord> = positions
        .par_iter()
        .enumerate()
        .map(|(pos, &(d, i))| {
            let doc = test.doc(d);
            let target = doc[i];
            let context = &doc[..i];
            let mut key = vec![0.0f32; encoder.dim()];
            encoder.encode_into(context, &mut key);
            let neighbors = searcher.search(&key, config.k);
            let p_knn_dist = knn_prob(&neighbors, config.tau);
            let p_lm = lm.prob(context, target);
            let p_knn = p_knn_dist.get(target);
            let p_interp = if p_knn_dist.is_empty() {
                p_lm
            } else if config.lambda == 1.0 {
                p_knn
            } else {
                interpolate_point(p_knn, p_lm, config.lambda)
            };
            let hit = neighbors.neighbors.iter().any(|n| n.value == target);
            EvalRecord {
                position: pos as u64,
                target_id: target,
                freq_datastore: freq_datastore.count(target),
                freq_pretrain: freq_pretrain.count(target),
                p_lm,
                p_knn,
                p_interp,
                hit,
                ctx_ngram_counts: ngram_counts[pos],
            }
        })
        .collect();

    let mut ln_base = 0.0f64;
    let mut ln_interp = 0.0f64;
    for r in &records {
        ln_base += r.p_lm.ln();
        ln_interp += r.p_interp.ln();
    }
    let t = records.len() as f64;
    Ok(EvalOutput {
        ppl_base: (-ln_base / t).exp(),
        ppl_knnlm: (-ln_interp / t).exp(),
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselm::{train_ngram_lm, ContextEncoder};
    use crate::corpus::{count_ngrams, count_tokens};
    use crate::knnlm::build_datastore;
    use crate::util::SplitMix64;
    use crate::vindex::FlatIndex;

    struct UniformLm {
        vocab: u32,
    }

    impl LanguageModel for UniformLm {
        fn vocab_size(&self) -> u32 {
            self.vocab
        }

        fn prob(&self, _context: &[u32], _token: u32) -> f64 {
            1.0 / self.vocab as f64
        }
    }

    fn encoder() -> ContextEncoder {
        ContextEncoder::new(16, 8, 0.7, 3).unwrap()
    }

    fn random_corpus(vocab: u32, docs: usize, len: usize, seed: u64) -> Corpus {
        let mut rng = SplitMix64::new(seed);
        Corpus::new(
            (0..docs).map(|_| (0..len).map(|_| rng.next_below(vocab as u64) as u32).collect())
                .collect(),
            vocab,
        )
        .unwrap()
    }

    #[test]
    fn uniform_model_alone_scores_vocab_size() {
        let train = random_corpus(12, 3, 40, 1);
        let test = random_corpus(12, 2, 25, 2);
        let enc = encoder();
        let ds = build_datastore(&train, &enc);
        let table = EmbeddingTable::new(&enc, 12);
        let flat = FlatIndex::new(ds.keys(), ds.values());
        let lm = UniformLm { vocab: 12 };
        let freq = count_tokens(&train);
        let config = KnnConfig { k: 4, lambda: 0.0, ..KnnConfig::default() };
        let out = eval_ppl(&lm, &flat, &table, &config, &test, &freq, &freq, &[]).unwrap();
        assert!((out.ppl_base - 12.0).abs() < 1e-9);
        assert!((out.ppl_knnlm - 12.0).abs() < 1e-9);
    }

    #[test]
    fn lambda_zero_scores_the_base_model_exactly() {
        let train = random_corpus(9, 4, 30, 5);
        let test = random_corpus(9, 2, 20, 6);
        let enc = encoder();
        let ds = build_datastore(&train, &enc);
        let table = EmbeddingTable::new(&enc, 9);
        let flat = FlatIndex::new(ds.keys(), ds.values());
        let lm = train_ngram_lm(&train, 2).unwrap();
        let freq = count_tokens(&train);
        let config = KnnConfig { k: 8, lambda: 0.0, ..KnnConfig::default() };
        let out = eval_ppl(&lm, &flat, &table, &config, &test, &freq, &freq, &[]).unwrap();
        assert_eq!(out.ppl_base, out.ppl_knnlm);
        for r in &out.records {
            assert_eq!(r.p_interp, r.p_lm);
        }
    }

    #[test]
    fn self_retrieval_hand_trace() {
        // Datastore corpus: two documents [7,1] and [7,2]. Entry keys:
        //   id 0: empty context, value 7      id 2: empty context, value 7
        //   id 1: context [7],  value 1       id 3: context [7],  value 2
        // Scoring the same corpus with k=1 exact search:
        //   pos 0: tie between ids 0,2 at d=0 → id 0, value 7 = target → hit
        //   pos 1: tie between ids 1,3 → id 1, value 1 = target → hit
        //   pos 2: → id 0, value 7 = target → hit
        //   pos 3: → id 1, value 1 ≠ target 2 → miss
        let corpus = Corpus::new(vec![vec![7, 1], vec![7, 2]], 8).unwrap();
        let enc = encoder();
        let ds = build_datastore(&corpus, &enc);
        let table = EmbeddingTable::new(&enc, 8);
        let flat = FlatIndex::new(ds.keys(), ds.values());
        let lm = train_ngram_lm(&corpus, 2).unwrap();
        let freq = count_tokens(&corpus);
        let config = KnnConfig { k: 1, ..KnnConfig::default() };
        let out = eval_ppl(&lm, &flat, &table, &config, &corpus, &freq, &freq, &[]).unwrap();
        let hits: Vec<bool> = out.records.iter().map(|r| r.hit).collect();
        assert_eq!(hits, vec![true, true, true, false]);
        assert_eq!(out.records[3].p_knn, 0.0);
        assert_eq!(out.records[1].p_knn, 1.0);
    }

    #[test]
    fn pure_neighbor_model_with_a_miss_is_infinite() {
        // Token 4 appears only in the test corpus.
        let train = Corpus::new(vec![vec![1, 2, 1, 2]], 5).unwrap();
        let test = Corpus::new(vec![vec![1, 4]], 5).unwrap();
        let enc = encoder();
        let ds = build_datastore(&train, &enc);
        let table = EmbeddingTable::new(&enc, 5);
        let flat = FlatIndex::new(ds.keys(), ds.values());
        let lm = train_ngram_lm(&train, 2).unwrap();
        let freq = count_tokens(&train);
        let config = KnnConfig { k: 2, lambda: 1.0, ..KnnConfig::default() };
        let out = eval_ppl(&lm, &flat, &table, &config, &test, &freq, &freq, &[]).unwrap();
        assert!(out.ppl_knnlm.is_infinite());
        assert!(out.ppl_base.is_finite());
    }

    #[test]
    fn hit_flag_agrees_with_neighbor_probability() {
        let train = random_corpus(15, 6, 50, 9);
        let test = random_corpus(15, 3, 30, 10);
        let enc = encoder();
        let ds = build_datastore(&train, &enc);
        let table = EmbeddingTable::new(&enc, 15);
        let flat = FlatIndex::new(ds.keys(), ds.values());
        let lm = train_ngram_lm(&train, 3).unwrap();
        let freq = count_tokens(&train);
        for k in [1usize, 4, 32] {
            let config = KnnConfig { k, tau: 10.0, ..KnnConfig::default() };
            let out = eval_ppl(&lm, &flat, &table, &config, &test, &freq, &freq, &[]).unwrap();
            for r in &out.records {
                assert_eq!(r.hit, r.p_knn > 0.0, "k={k} position {}", r.position);
            }
        }
    }

    #[test]
    fn context_ngram_columns_match_direct_recount() {
        let train = random_corpus(6, 3, 25, 20);
        let test = random_corpus(6, 2, 12, 21);
        let enc = encoder();
        let ds = build_datastore(&train, &enc);
        let table = EmbeddingTable::new(&enc, 6);
        let flat = FlatIndex::new(ds.keys(), ds.values());
        let lm = train_ngram_lm(&train, 2).unwrap();
        let freq = count_tokens(&train);
        let tables: Vec<NGramTable> =
            (1..=5).map(|n| count_ngrams(&train, n).unwrap()).collect();
        let config = KnnConfig { k: 2, ..KnnConfig::default() };
        let out =
            eval_ppl(&lm, &flat, &table, &config, &test, &freq, &freq, &tables).unwrap();
        for n in 1..=5usize {
            let want = context_ngram_frequency(&test, &tables, n).unwrap();
            for (r, w) in out.records.iter().zip(want) {
                assert_eq!(r.ctx_ngram_counts[n - 1], w, "n={n} pos {}", r.position);
            }
        }
    }

    #[test]
    fn output_is_deterministic_and_ordered() {
        let train = random_corpus(10, 5, 40, 30);
        let test = random_corpus(10, 3, 20, 31);
        let enc = encoder();
        let ds = build_datastore(&train, &enc);
        let table = EmbeddingTable::new(&enc, 10);
        let flat = FlatIndex::new(ds.keys(), ds.values());
        let lm = train_ngram_lm(&train, 3).unwrap();
        let freq = count_tokens(&train);
        let config = KnnConfig { k: 8, ..KnnConfig::default() };
        let a = eval_ppl(&lm, &flat, &table, &config, &test, &freq, &freq, &[]).unwrap();
        let b = eval_ppl(&lm, &flat, &table, &config, &test, &freq, &freq, &[]).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.records.len() as u64, test.total_tokens());
        for (i, r) in a.records.iter().enumerate() {
            assert_eq!(r.position, i as u64);
        }
    }

    #[test]
    fn rejects_vocabulary_mismatch_and_empty_test() {
        let train = random_corpus(8, 2, 20, 40);
        let enc = encoder();
        let ds = build_datastore(&train, &enc);
        let table = EmbeddingTable::new(&enc, 8);
        let flat = FlatIndex::new(ds.keys(), ds.values());
        let lm = train_ngram_lm(&train, 2).unwrap();
        let freq = count_tokens(&train);
        let config = KnnConfig { k: 2, ..KnnConfig::default() };
        let bad_vocab = random_corpus(5, 1, 10, 41);
        assert!(
            eval_ppl(&lm, &flat, &table, &config, &bad_vocab, &freq, &freq, &[]).is_err()
        );
        let empty = Corpus::new(vec![vec![]], 8).unwrap();
        assert!(eval_ppl(&lm, &flat, &table, &config, &empty, &freq, &freq, &[]).is_err());
    }
}
