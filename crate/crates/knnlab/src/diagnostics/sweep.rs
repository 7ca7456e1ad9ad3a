//! Neighbor-count / temperature sweeps summarized per vocabulary tertile.
//!
//! All (k, τ) points share one retrieval pass: neighbors are fetched once
//! per test position at the largest k and truncated per point. A sorted
//! neighbor list's k-prefix is exactly the k-neighbor result (same keys,
//! same tie rule), and the probability model only looks at the retrieved
//! prefix, so truncation is lossless and saves |points|−1 searches.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;

use super::tertiles::{Tertile, TertileCategories};
use crate::baselm::{EmbeddingTable, LanguageModel};
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::knnlm::{knn_prob, EvalRecord};
use crate::vindex::NeighborSearch;

pub const SWEEP_HEADER: &str = "k,tau,category,mean_p_knn,mean_p_lm,n_obs";

/// One retrieval configuration to evaluate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepPoint {
    pub k: usize,
    pub tau: f64,
}

/// Mean probabilities for one (k, τ, tertile) cell.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub k: usize,
    pub tau: f64,
    pub category: Tertile,
    pub mean_p_knn: Option<f64>,
    pub mean_p_lm: Option<f64>,
    pub n_obs: u64,
}

/// Score every test position once per sweep point and aggregate by the
/// target's tertile. Rows come out in input-point order, LOW/MED/HIGH
/// within each point.
pub fn sweep<L: LanguageModel, S: NeighborSearch + Sync + ?Sized>(
    lm: &L,
    searcher: &S,
    encoder: &EmbeddingTable,
    points: &[SweepPoint],
    test: &Corpus,
    tertiles: &TertileCategories,
) -> Result<Vec<SweepRow>> {
    if points.is_empty() {
        return Err(Error::InvalidInput("sweep needs at least one (k, tau) point".into()));
    }
    for p in points {
        if p.k == 0 {
            return Err(Error::InvalidInput("sweep k must be at least 1".into()));
        }
        if !p.tau.is_finite() || p.tau <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "sweep temperature must be positive and finite, got {}",
                p.tau
            )));
        }
    }
    if test.total_tokens() == 0 {
        return Err(Error::InvalidInput("test corpus has no tokens to score".into()));
    }
    if test.vocab_size() != lm.vocab_size()
        || test.vocab_size() as usize != tertiles.len()
    {
        return Err(Error::InvalidInput(format!(
            "vocabulary mismatch: test corpus has {} types, model {}, categories {}",
            test.vocab_size(),
            lm.vocab_size(),
            tertiles.len()
        )));
    }
    let k_max = points.iter().map(|p| p.k).max().unwrap();

    let positions: Vec<(usize, usize)> = test
        .docs()
        .iter()
        .enumerate()
        .flat_map(|(d, doc)| (0..doc.len()).map(move |i| (d, i)))
        .collect();

    // Per position: target tertile, base probability, and one neighbor
    // probability per sweep point (all from a single k_max retrieval).
    let scored: Vec<(Tertile, f64, Vec<f64>)> = positions
        .par_iter()
        .map(|&(d, i)| {
            let doc = test.doc(d);
            let target = doc[i];
            let context = &doc[..i];
            let mut key = vec![0.0f32; encoder.dim()];
            encoder.encode_into(context, &mut key);
            let neighbors = searcher.search(&key, k_max);
            let p_lm = lm.prob(context, target);
            let per_point: Vec<f64> = points
                .iter()
                .map(|p| knn_prob(&neighbors.truncated(p.k), p.tau).get(target))
                .collect();
            (tertiles.of(target), p_lm, per_point)
        })
        .collect();

    let mut n_obs = [0u64; 3];
    let mut lm_sum = [0f64; 3];
    let mut knn_sum = vec![[0f64; 3]; points.len()];
    for (tert, p_lm, per_point) in &scored {
        let t = tert.index();
        n_obs[t] += 1;
        lm_sum[t] += p_lm;
        for (sums, p) in knn_sum.iter_mut().zip(per_point) {
            sums[t] += p;
        }
    }

    let mut rows = Vec::with_capacity(points.len() * 3);
    for (pi, p) in points.iter().enumerate() {
        for tert in Tertile::ALL {
            let t = tert.index();
            rows.push(SweepRow {
                k: p.k,
                tau: p.tau,
                category: tert,
                mean_p_knn: (n_obs[t] > 0).then(|| knn_sum[pi][t] / n_obs[t] as f64),
                mean_p_lm: (n_obs[t] > 0).then(|| lm_sum[t] / n_obs[t] as f64),
                n_obs: n_obs[t],
            });
        }
    }
    Ok(rows)
}

/// The same per-tertile aggregation computed from existing evaluation
/// records (which already carry p_knn and p_lm at one configuration).
/// A one-point sweep at that configuration produces identical rows.
pub fn tertile_summary(
    records: &[EvalRecord],
    tertiles: &TertileCategories,
    k: usize,
    tau: f64,
) -> Vec<SweepRow> {
    let mut n_obs = [0u64; 3];
    let mut lm_sum = [0f64; 3];
    let mut knn_sum = [0f64; 3];
    for r in records {
        let t = tertiles.of(r.target_id).index();
        n_obs[t] += 1;
        lm_sum[t] += r.p_lm;
        knn_sum[t] += r.p_knn;
    }
    Tertile::ALL
        .iter()
        .map(|&tert| {
            let t = tert.index();
            SweepRow {
                k,
                tau,
                category: tert,
                mean_p_knn: (n_obs[t] > 0).then(|| knn_sum[t] / n_obs[t] as f64),
                mean_p_lm: (n_obs[t] > 0).then(|| lm_sum[t] / n_obs[t] as f64),
                n_obs: n_obs[t],
            }
        })
        .collect()
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{SWEEP_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.k,
            r.tau,
            r.category.as_str(),
            cell(r.mean_p_knn),
            cell(r.mean_p_lm),
            r.n_obs
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_sweep_csv(path: &Path) -> Result<Vec<SweepRow>> {
    let mut lines = BufReader::new(File::open(path)?).lines();
    let header = lines
        .next()
        .transpose()?
        .ok_or_else(|| Error::Data(format!("{}: empty sweep file", path.display())))?;
    if header.trim_end() != SWEEP_HEADER {
        return Err(Error::Data(format!("{}: unexpected sweep header", path.display())));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let bad = || Error::Data(format!("{}: line {}: bad row", path.display(), i + 2));
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(bad());
        }
        let parse_opt = |f: &str| -> Result<Option<f64>> {
            if f.is_empty() {
                Ok(None)
            } else {
                f.parse().map(Some).map_err(|_| bad())
            }
        };
        rows.push(SweepRow {
            k: fields[0].parse().map_err(|_| bad())?,
            tau: fields[1].parse().map_err(|_| bad())?,
            category: Tertile::from_str(fields[2]).ok_or_else(bad)?,
            mean_p_knn: parse_opt(fields[3])?,
            mean_p_lm: parse_opt(fields[4])?,
            n_obs: fields[5].parse().map_err(|_| bad())?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use std::sync::atomic::{AtomicUsize, Ordering};

    use super::*;
    use crate::baselm::{train_ngram_lm, ContextEncoder};
    use crate::corpus::count_tokens;
    use crate::diagnostics::categorize_tertiles;
    use crate::knnlm::{build_datastore, eval_ppl, KnnConfig};
    use crate::util::SplitMix64;
    use crate::vindex::{FlatIndex, NeighborSet};

    struct CountingSearcher<'a> {
        inner: FlatIndex<'a>,
        calls: AtomicUsize,
        ks_seen: std::sync::Mutex<Vec<usize>>,
    }

    impl NeighborSearch for CountingSearcher<'_> {
        fn search(&self, query: &[f32], k: usize) -> NeighborSet {
            self.calls.fetch_add(1, Ordering::Relaxed);
            self.ks_seen.lock().unwrap().push(k);
            self.inner.search(query, k)
        }
    }

    fn random_corpus(vocab: u32, docs: usize, len: usize, seed: u64) -> Corpus {
        let mut rng = SplitMix64::new(seed);
        let d: Vec<Vec<u32>> = (0..docs)
            .map(|_| (0..len).map(|_| rng.next_below(vocab as u64) as u32).collect())
            .collect();
        Corpus::new(d, vocab).unwrap()
    }

    #[test]
    fn neighbors_fetched_once_per_position_at_max_k() {
        let train = random_corpus(9, 4, 30, 1);
        let test = random_corpus(9, 2, 15, 2);
        let enc = ContextEncoder::new(8, 4, 0.7, 3).unwrap();
        let ds = build_datastore(&train, &enc);
        let table = EmbeddingTable::new(&enc, 9);
        let searcher = CountingSearcher {
            inner: FlatIndex::new(ds.keys(), ds.values()),
            calls: AtomicUsize::new(0),
            ks_seen: std::sync::Mutex::new(Vec::new()),
        };
        let lm = train_ngram_lm(&train, 2).unwrap();
        let tertiles = categorize_tertiles(&count_tokens(&train)).unwrap();
        let points = [
            SweepPoint { k: 1, tau: 1.0 },
            SweepPoint { k: 4, tau: 1.0 },
            SweepPoint { k: 4, tau: 10.0 },
            SweepPoint { k: 16, tau: 10.0 },
        ];
        let rows = sweep(&lm, &searcher, &table, &points, &test, &tertiles).unwrap();
        assert_eq!(rows.len(), points.len() * 3);
        assert_eq!(searcher.calls.load(Ordering::Relaxed), 30);
        assert!(searcher.ks_seen.lock().unwrap().iter().all(|&k| k == 16));
    }

    #[test]
    fn truncated_retrieval_equals_direct_small_k_search() {
        let train = random_corpus(7, 3, 40, 4);
        let enc = ContextEncoder::new(8, 4, 0.7, 5).unwrap();
        let ds = build_datastore(&train, &enc);
        let flat = FlatIndex::new(ds.keys(), ds.values());
        let mut rng = SplitMix64::new(6);
        for _ in 0..25 {
            let q: Vec<f32> = (0..8).map(|_| (rng.next_f64() * 2.0 - 1.0) as f32).collect();
            let big = flat.search(&q, 12);
            for k in [1usize, 3, 12] {
                assert_eq!(big.truncated(k).neighbors, flat.search(&q, k).neighbors);
            }
        }
    }

    #[test]
    fn one_point_sweep_matches_tertile_summary_of_eval_records() {
        let train = random_corpus(12, 5, 40, 7);
        let test = random_corpus(12, 3, 20, 8);
        let enc = ContextEncoder::new(8, 4, 0.7, 9).unwrap();
        let ds = build_datastore(&train, &enc);
        let table = EmbeddingTable::new(&enc, 12);
        let flat = FlatIndex::new(ds.keys(), ds.values());
        let lm = train_ngram_lm(&train, 2).unwrap();
        let freq = count_tokens(&train);
        let tertiles = categorize_tertiles(&freq).unwrap();
        let config = KnnConfig { k: 8, tau: 5.0, ..KnnConfig::default() };
        let out = eval_ppl(&lm, &flat, &table, &config, &test, &freq, &freq, &[]).unwrap();
        let summary = tertile_summary(&out.records, &tertiles, config.k, config.tau);
        let swept = sweep(
            &lm,
            &flat,
            &table,
            &[SweepPoint { k: config.k, tau: config.tau }],
            &test,
            &tertiles,
        )
        .unwrap();
        // Same positions, same probabilities, same accumulation order:
        // the rows must match exactly, not merely approximately.
        assert_eq!(swept, summary);
    }

    #[test]
    fn tertile_counts_partition_all_positions() {
        let train = random_corpus(10, 4, 30, 10);
        let test = random_corpus(10, 2, 25, 11);
        let enc = ContextEncoder::new(8, 4, 0.7, 12).unwrap();
        let ds = build_datastore(&train, &enc);
        let table = EmbeddingTable::new(&enc, 10);
        let flat = FlatIndex::new(ds.keys(), ds.values());
        let lm = train_ngram_lm(&train, 2).unwrap();
        let tertiles = categorize_tertiles(&count_tokens(&train)).unwrap();
        let rows = sweep(
            &lm,
            &flat,
            &table,
            &[SweepPoint { k: 2, tau: 1.0 }],
            &test,
            &tertiles,
        )
        .unwrap();
        let total: u64 = rows.iter().map(|r| r.n_obs).sum();
        assert_eq!(total, test.total_tokens());
    }

    #[test]
    fn sweep_rows_round_trip_through_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sweep.csv");
        let rows = vec![
            SweepRow {
                k: 16,
                tau: 10.0,
                category: Tertile::Low,
                mean_p_knn: Some(0.125),
                mean_p_lm: Some(0.25),
                n_obs: 40,
            },
            SweepRow {
                k: 16,
                tau: 10.0,
                category: Tertile::Med,
                mean_p_knn: None,
                mean_p_lm: None,
                n_obs: 0,
            },
        ];
        write_sweep_csv(&path, &rows).unwrap();
        assert_eq!(read_sweep_csv(&path).unwrap(), rows);
    }

    #[test]
    fn invalid_sweep_inputs_are_rejected() {
        let train = random_corpus(5, 2, 10, 13);
        let enc = ContextEncoder::new(8, 4, 0.7, 14).unwrap();
        let ds = build_datastore(&train, &enc);
        let table = EmbeddingTable::new(&enc, 5);
        let flat = FlatIndex::new(ds.keys(), ds.values());
        let lm = train_ngram_lm(&train, 2).unwrap();
        let tertiles = categorize_tertiles(&count_tokens(&train)).unwrap();
        let err = sweep(&lm, &flat, &table, &[], &train, &tertiles);
        assert!(err.is_err());
        let err = sweep(
            &lm,
            &flat,
            &table,
            &[SweepPoint { k: 0, tau: 1.0 }],
            &train,
            &tertiles,
        );
        assert!(err.is_err());
        let err = sweep(
            &lm,
            &flat,
            &table,
            &[SweepPoint { k: 1, tau: 0.0 }],
            &train,
            &tertiles,
        );
        assert!(err.is_err());
    }
}
