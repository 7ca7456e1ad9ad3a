//! Rarity-driven dataset resplitting.
//!
//! Documents dense in corpus-hapax n-grams are pulled out of the training
//! set and dealt into validation/test halves, concentrating rare phenomena
//! in the evaluation partitions instead of letting a uniform split dilute
//! them.

use super::ngram::{count_ngrams, rare_ngram_ratio};
use super::Corpus;
use crate::error::{Error, Result};
use crate::util::SplitMix64;

/// Outcome of [`resplit`]: a disjoint train/valid/test partition of the
/// input documents.
#[derive(Clone, Debug)]
pub struct SplitResult {
    pub train: Corpus,
    pub valid: Corpus,
    pub test: Corpus,
    pub seed: u64,
    pub target_eval_tokens: u64,
}

/// Partition `corpus` so the evaluation sets absorb the documents richest in
/// corpus-hapax n-grams.
///
/// Documents are ranked by [`rare_ngram_ratio`] (orders 1..=4) descending,
/// ties broken by original position; the smallest prefix of that ranking
/// whose token count reaches `target_eval_tokens` is extracted, shuffled with
/// `seed`, and dealt alternately to valid and test. Remaining documents stay
/// in train in their original order. Deterministic given (corpus, target,
/// seed).
pub fn resplit(corpus: &Corpus, target_eval_tokens: u64, seed: u64) -> Result<SplitResult> {
    let total = corpus.total_tokens();
    if target_eval_tokens > total {
        return Err(Error::InvalidInput(format!(
            "target_eval_tokens {target_eval_tokens} exceeds corpus total {total}"
        )));
    }

    let tables: Vec<_> = (1..=4)
        .map(|n| count_ngrams(corpus, n))
        .collect::<Result<_>>()?;
    let scores: Vec<f64> = corpus
        .docs()
        .iter()
        .map(|d| rare_ngram_ratio(d, &tables))
        .collect();

    let mut order: Vec<usize> = (0..corpus.n_docs()).collect();
    // Stable sort keeps ties in original document order.
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap());

    let mut taken = Vec::new();
    let mut taken_tokens = 0u64;
    for &i in &order {
        if taken_tokens >= target_eval_tokens {
            break;
        }
        taken.push(i);
        taken_tokens += corpus.doc(i).len() as u64;
    }

    let mut rng = SplitMix64::new(seed);
    rng.shuffle(&mut taken);

    let mut in_eval = vec![false; corpus.n_docs()];
    for &i in &taken {
        in_eval[i] = true;
    }

    let mut valid_docs = Vec::new();
    let mut test_docs = Vec::new();
    for (pos, &i) in taken.iter().enumerate() {
        let doc = corpus.doc(i).to_vec();
        if pos % 2 == 0 {
            valid_docs.push(doc);
        } else {
            test_docs.push(doc);
        }
    }
    let train_docs: Vec<Vec<u32>> = (0..corpus.n_docs())
        .filter(|&i| !in_eval[i])
        .map(|i| corpus.doc(i).to_vec())
        .collect();

    let v = corpus.vocab_size();
    Ok(SplitResult {
        train: Corpus::new(train_docs, v)?,
        valid: Corpus::new(valid_docs, v)?,
        test: Corpus::new(test_docs, v)?,
        seed,
        target_eval_tokens,
    })
}
