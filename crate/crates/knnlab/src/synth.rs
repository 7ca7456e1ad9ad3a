//! Synthetic corpora and vector sets for desk-scale experiments.
//!
//! The text generator draws documents from a Zipf token distribution with
//! two structured deviations that make frequency-stratified retrieval
//! diagnostics informative rather than degenerate:
//!
//! * per-document exponent jitter, so documents differ in how much rare
//!   mass they carry (document-level heterogeneity is what makes
//!   rare-aware resplitting distinguishable from a random split);
//! * uniformly-drawn tokens over the first few positions of each
//!   document ("head" positions), so low-frequency types owe a large
//!   share of their occurrences to short, atypical contexts while
//!   high-frequency types are dominated by full-window contexts. That
//!   asymmetry is what gives rare types visibly wider key clouds and
//!   larger quantization error in the datastore built from the text.

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::util::{Matrix, SplitMix64};

#[derive(Clone, Debug, PartialEq)]
pub struct ZipfCorpusConfig {
    pub vocab_size: u32,
    /// Zipf exponent: token at rank r (1-based) has weight r^-alpha.
    pub alpha: f64,
    pub n_docs: usize,
    pub doc_len: usize,
    /// Per-document alpha is jittered uniformly in ±alpha_jitter.
    pub alpha_jitter: f64,
    /// Number of leading positions per document eligible for uniform
    /// draws.
    pub head_positions: usize,
    /// Probability that an eligible head position draws uniformly over
    /// the vocabulary instead of from the Zipf distribution.
    pub head_uniform_prob: f64,
    pub seed: u64,
}

impl ZipfCorpusConfig {
    /// Defaults tuned for frequency-stratified diagnostics; pass
    /// `head_uniform_prob: 0.0` for a plain i.i.d. Zipf corpus.
    pub fn new(vocab_size: u32, alpha: f64, n_docs: usize, doc_len: usize, seed: u64) -> Self {
        ZipfCorpusConfig {
            vocab_size,
            alpha,
            n_docs,
            doc_len,
            alpha_jitter: 0.15,
            head_positions: 8,
            head_uniform_prob: 0.75,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.vocab_size < 2 {
            return Err(Error::InvalidInput(format!(
                "synthetic vocabulary needs at least 2 types, got {}",
                self.vocab_size
            )));
        }
        if self.n_docs == 0 || self.doc_len == 0 {
            return Err(Error::InvalidInput(
                "synthetic corpus needs at least 1 document of at least 1 token".into(),
            ));
        }
        if !self.alpha.is_finite() || self.alpha <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "Zipf exponent must be positive and finite, got {}",
                self.alpha
            )));
        }
        if !self.alpha_jitter.is_finite()
            || self.alpha_jitter < 0.0
            || self.alpha_jitter >= self.alpha
        {
            return Err(Error::InvalidInput(format!(
                "alpha jitter must be in [0, alpha), got {}",
                self.alpha_jitter
            )));
        }
        if !(0.0..=1.0).contains(&self.head_uniform_prob) {
            return Err(Error::InvalidInput(format!(
                "head uniform probability must be in [0, 1], got {}",
                self.head_uniform_prob
            )));
        }
        Ok(())
    }
}

/// Cumulative (unnormalized) Zipf weights; `cum[t]` covers ranks 0..=t.
fn zipf_cumulative(vocab_size: u32, alpha: f64) -> Vec<f64> {
    let mut cum = Vec::with_capacity(vocab_size as usize);
    let mut total = 0.0f64;
    for r in 1..=vocab_size as u64 {
        total += (r as f64).powf(-alpha);
        cum.push(total);
    }
    cum
}

fn sample_from_cumulative(cum: &[f64], rng: &mut SplitMix64) -> u32 {
    let u = rng.next_f64() * cum[cum.len() - 1];
    cum.partition_point(|&c| c <= u).min(cum.len() - 1) as u32
}

/// Generate a corpus of `n_docs` documents of `doc_len` tokens each.
/// Token id equals Zipf rank (0 = most frequent). Deterministic in the
/// seed: one sequential RNG drives every draw.
pub fn generate_zipf_corpus(config: &ZipfCorpusConfig) -> Result<Corpus> {
    config.validate()?;
    let mut rng = SplitMix64::new(config.seed);
    let base_cum =
        (config.alpha_jitter == 0.0).then(|| zipf_cumulative(config.vocab_size, config.alpha));
    let mut docs = Vec::with_capacity(config.n_docs);
    for _ in 0..config.n_docs {
        let cum = match &base_cum {
            Some(c) => c.clone(),
            None => {
                let a = config.alpha + (rng.next_f64() * 2.0 - 1.0) * config.alpha_jitter;
                zipf_cumulative(config.vocab_size, a)
            }
        };
        let mut doc = Vec::with_capacity(config.doc_len);
        for p in 0..config.doc_len {
            let head = p < config.head_positions
                && config.head_uniform_prob > 0.0
                && rng.next_f64() < config.head_uniform_prob;
            let t = if head {
                rng.next_below(config.vocab_size as u64) as u32
            } else {
                sample_from_cumulative(&cum, &mut rng)
            };
            doc.push(t);
        }
        docs.push(doc);
    }
    Corpus::new(docs, config.vocab_size)
}

/// `n` points from a uniform mixture of `n_clusters` isotropic Gaussian
/// blobs with per-coordinate standard deviation `spread`, centers drawn
/// uniformly in [-1, 1]^dim. Deterministic in the seed.
pub fn gaussian_mixture(
    n: usize,
    dim: usize,
    n_clusters: usize,
    spread: f64,
    seed: u64,
) -> Matrix {
    assert!(dim > 0 && n_clusters > 0, "mixture needs a positive dim and cluster count");
    let mut rng = SplitMix64::new(seed);
    let mut centers = Matrix::with_capacity(dim, n_clusters);
    for _ in 0..n_clusters {
        let row: Vec<f32> = (0..dim).map(|_| (rng.next_f64() * 2.0 - 1.0) as f32).collect();
        centers.push_row(&row);
    }
    let mut out = Matrix::with_capacity(dim, n);
    let mut row = vec![0.0f32; dim];
    for _ in 0..n {
        let c = rng.next_below(n_clusters as u64) as usize;
        for (x, &center) in row.iter_mut().zip(centers.row(c)) {
            *x = center + (spread * standard_normal(&mut rng)) as f32;
        }
        out.push_row(&row);
    }
    out
}

/// Approximate standard normal via the classic sum of 12 uniforms
/// (Irwin-Hall): mean 0, variance 1, tails clipped at ±6 — more than
/// adequate for benchmark data.
fn standard_normal(rng: &mut SplitMix64) -> f64 {
    let s: f64 = (0..12).map(|_| rng.next_f64()).sum();
    s - 6.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::count_tokens;

    fn plain_zipf(vocab: u32, alpha: f64, n_docs: usize, doc_len: usize, seed: u64) -> Corpus {
        let config = ZipfCorpusConfig {
            alpha_jitter: 0.0,
            head_uniform_prob: 0.0,
            ..ZipfCorpusConfig::new(vocab, alpha, n_docs, doc_len, seed)
        };
        generate_zipf_corpus(&config).unwrap()
    }

    #[test]
    fn corpus_has_requested_shape_and_vocab() {
        let config = ZipfCorpusConfig::new(100, 1.1, 7, 40, 1);
        let corpus = generate_zipf_corpus(&config).unwrap();
        assert_eq!(corpus.n_docs(), 7);
        assert_eq!(corpus.total_tokens(), 280);
        assert_eq!(corpus.vocab_size(), 100);
        assert!(corpus.docs().iter().flatten().all(|&t| t < 100));
    }

    #[test]
    fn generation_is_deterministic_in_the_seed() {
        let config = ZipfCorpusConfig::new(200, 1.1, 10, 50, 42);
        let a = generate_zipf_corpus(&config).unwrap();
        let b = generate_zipf_corpus(&config).unwrap();
        assert_eq!(a.hash(), b.hash());
        let c = generate_zipf_corpus(&ZipfCorpusConfig { seed: 43, ..config }).unwrap();
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn token_zero_share_matches_the_zipf_normalizer() {
        // V = 50, alpha = 1.0: share(rank 1) = 1 / H(50) with
        // H(50) = sum 1/r = 4.4992...
        let corpus = plain_zipf(50, 1.0, 100, 2000, 7);
        let freq = count_tokens(&corpus);
        let h50: f64 = (1..=50u64).map(|r| 1.0 / r as f64).sum();
        let want = 1.0 / h50;
        let got = freq.count(0) as f64 / freq.total() as f64;
        assert!((got - want).abs() / want < 0.05, "share {got} vs {want}");
    }

    #[test]
    fn counts_decrease_along_ranks() {
        let corpus = plain_zipf(100, 1.2, 100, 1000, 3);
        let freq = count_tokens(&corpus);
        assert!(freq.count(0) > freq.count(10));
        assert!(freq.count(10) > freq.count(60));
        assert!(freq.count(60) > freq.count(99));
    }

    #[test]
    fn fully_uniform_heads_flatten_the_distribution() {
        let config = ZipfCorpusConfig {
            alpha_jitter: 0.0,
            head_positions: usize::MAX,
            head_uniform_prob: 1.0,
            ..ZipfCorpusConfig::new(20, 1.1, 40, 500, 9)
        };
        let corpus = generate_zipf_corpus(&config).unwrap();
        let freq = count_tokens(&corpus);
        let expect = freq.total() as f64 / 20.0;
        for t in 0..20 {
            let c = freq.count(t) as f64;
            assert!((c - expect).abs() / expect < 0.15, "token {t}: {c} vs {expect}");
        }
    }

    #[test]
    fn head_positions_boost_rare_types() {
        let base = ZipfCorpusConfig {
            alpha_jitter: 0.0,
            head_uniform_prob: 0.0,
            ..ZipfCorpusConfig::new(500, 1.3, 400, 100, 11)
        };
        let with_heads = ZipfCorpusConfig {
            head_positions: 8,
            head_uniform_prob: 1.0,
            ..base.clone()
        };
        let plain = count_tokens(&generate_zipf_corpus(&base).unwrap());
        let boosted = count_tokens(&generate_zipf_corpus(&with_heads).unwrap());
        let rare_share = |f: &crate::corpus::FrequencyTable| {
            let rare: u64 = (250..500).map(|t| f.count(t)).sum();
            rare as f64 / f.total() as f64
        };
        assert!(rare_share(&boosted) > 2.0 * rare_share(&plain));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let ok = ZipfCorpusConfig::new(10, 1.0, 1, 10, 0);
        assert!(generate_zipf_corpus(&ZipfCorpusConfig { vocab_size: 1, ..ok.clone() }).is_err());
        assert!(generate_zipf_corpus(&ZipfCorpusConfig { n_docs: 0, ..ok.clone() }).is_err());
        assert!(generate_zipf_corpus(&ZipfCorpusConfig { alpha: 0.0, ..ok.clone() }).is_err());
        assert!(
            generate_zipf_corpus(&ZipfCorpusConfig { alpha_jitter: 1.0, ..ok.clone() }).is_err()
        );
        assert!(generate_zipf_corpus(&ZipfCorpusConfig { head_uniform_prob: 1.5, ..ok }).is_err());
    }

    #[test]
    fn mixture_points_hug_their_nearest_center() {
        let dim = 16;
        let points = gaussian_mixture(400, dim, 8, 0.02, 5);
        // Rebuild the centers the generator drew (same seed, same order).
        let mut rng = SplitMix64::new(5);
        let mut centers = Matrix::new(dim);
        for _ in 0..8 {
            let row: Vec<f32> = (0..dim).map(|_| (rng.next_f64() * 2.0 - 1.0) as f32).collect();
            centers.push_row(&row);
        }
        for i in 0..points.rows() {
            let nearest = (0..8)
                .map(|c| crate::util::squared_l2(points.row(i), centers.row(c)))
                .fold(f32::INFINITY, f32::min);
            // 16 coords of sigma 0.02: expected squared distance 0.0064.
            assert!(nearest < 0.1, "point {i} is {nearest} from every center");
        }
    }

    #[test]
    fn mixture_is_deterministic_and_shaped() {
        let a = gaussian_mixture(50, 8, 4, 0.1, 2);
        let b = gaussian_mixture(50, 8, 4, 0.1, 2);
        assert_eq!(a.data(), b.data());
        assert_eq!(a.rows(), 50);
        assert_eq!(a.dim(), 8);
    }

    #[test]
    fn irwin_hall_moments_are_near_standard_normal() {
        let mut rng = SplitMix64::new(13);
        let n = 20_000;
        let samples: Vec<f64> = (0..n).map(|_| standard_normal(&mut rng)).collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "variance {var}");
    }
}
