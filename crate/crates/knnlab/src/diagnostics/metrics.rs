//! Datastore-side per-type metrics and their binned reports.
//!
//! All three metrics stratify token types by datastore frequency (the
//! type's entry count). `n_obs` counts datastore entries, so each
//! report's bins sum to the datastore size — except contamination under
//! an explicit per-type sampling budget, where `n_obs` counts evaluated
//! entries.

use rayon::prelude::*;

use super::report::DiagnosticsReport;
use super::FrequencyBins;
use crate::util::{mix64, Matrix, SplitMix64};
use crate::vindex::FlatIndex;

/// Datastore entry ids grouped by value (token type), ascending within
/// each group. Indexed by token id; types with no entries are empty.
pub fn entries_by_type(values: &[u32], vocab_size: u32) -> Vec<Vec<u32>> {
    let mut by_type = vec![Vec::new(); vocab_size as usize];
    for (id, &v) in values.iter().enumerate() {
        by_type[v as usize].push(id as u32);
    }
    by_type
}

/// Coefficient of variation of the Euclidean distances from a type's
/// key centroid to each of its keys: population standard deviation over
/// mean. Undefined (`None`) for fewer than 2 entries; 0 when all keys
/// coincide (mean distance 0).
pub fn centroid_cv(keys: &Matrix, entry_ids: &[u32]) -> Option<f64> {
    if entry_ids.len() < 2 {
        return None;
    }
    let dim = keys.dim();
    let mut centroid = vec![0f64; dim];
    for &id in entry_ids {
        for (c, &v) in centroid.iter_mut().zip(keys.row(id as usize)) {
            *c += v as f64;
        }
    }
    let inv = 1.0 / entry_ids.len() as f64;
    for c in centroid.iter_mut() {
        *c *= inv;
    }
    let dists: Vec<f64> = entry_ids
        .iter()
        .map(|&id| {
            keys.row(id as usize)
                .iter()
                .zip(&centroid)
                .map(|(&k, &c)| {
                    let d = k as f64 - c;
                    d * d
                })
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    let mean = dists.iter().sum::<f64>() / dists.len() as f64;
    if mean == 0.0 {
        return Some(0.0);
    }
    let var = dists
        .iter()
        .map(|d| {
            let e = d - mean;
            e * e
        })
        .sum::<f64>()
        / dists.len() as f64;
    Some(var.sqrt() / mean)
}

/// Fraction of a type's entries whose exact nearest id-distinct neighbor
/// carries a different value. Always computed against exhaustive search
/// over the true keys, never against quantized distances. Undefined when
/// the datastore has fewer than 2 entries in total or the type none.
pub fn contamination_rate(index: &FlatIndex<'_>, entry_ids: &[u32]) -> Option<f64> {
    if entry_ids.is_empty() || index.len() < 2 {
        return None;
    }
    let values = index.values();
    let contaminated = index
        .self_nearest_batch(entry_ids)
        .iter()
        .zip(entry_ids)
        .filter(|(nearest, &id)| {
            nearest.expect("index has >= 2 entries").value != values[id as usize]
        })
        .count();
    Some(contaminated as f64 / entry_ids.len() as f64)
}

/// Per-bin key-cloud dispersion. `n_obs` counts all entries of the
/// bin's types; `mean_cv` averages over the bin's types with a defined
/// CV (at least 2 entries), one vote per type.
pub fn cv_report(
    keys: &Matrix,
    values: &[u32],
    vocab_size: u32,
    bins: &FrequencyBins,
) -> DiagnosticsReport {
    let by_type = entries_by_type(values, vocab_size);
    let cvs: Vec<Option<f64>> =
        by_type.par_iter().map(|entries| centroid_cv(keys, entries)).collect();
    let mut report = DiagnosticsReport::empty(bins);
    let mut sums = vec![0f64; bins.n_bins()];
    let mut types = vec![0u64; bins.n_bins()];
    for (entries, cv) in by_type.iter().zip(&cvs) {
        if entries.is_empty() {
            continue;
        }
        let b = bins.bin_of(entries.len() as u64);
        report.rows[b].n_obs += entries.len() as u64;
        if let Some(cv) = cv {
            sums[b] += cv;
            types[b] += 1;
        }
    }
    for (b, row) in report.rows.iter_mut().enumerate() {
        if types[b] > 0 {
            row.mean_cv = Some(sums[b] / types[b] as f64);
        }
    }
    report
}

/// Per-bin contamination, pooled over entries: the fraction of evaluated
/// entries in the bin whose nearest id-distinct neighbor carries a
/// different value. `sample_per_type` caps the entries evaluated for any
/// one type (0 = evaluate all; required for exact-oracle comparisons).
/// Sampling is a deterministic function of `seed` and the token id.
pub fn contamination_report(
    index: &FlatIndex<'_>,
    vocab_size: u32,
    bins: &FrequencyBins,
    sample_per_type: usize,
    seed: u64,
) -> DiagnosticsReport {
    let values = index.values();
    let by_type = entries_by_type(values, vocab_size);
    let evaluated: Vec<Vec<u32>> = by_type
        .iter()
        .enumerate()
        .map(|(t, entries)| {
            if sample_per_type == 0 || entries.len() <= sample_per_type {
                entries.clone()
            } else {
                let mut picked = entries.clone();
                let mut rng = SplitMix64::new(mix64(seed ^ (t as u64 + 1)));
                rng.shuffle(&mut picked);
                picked.truncate(sample_per_type);
                picked.sort_unstable();
                picked
            }
        })
        .collect();
    let flags: Vec<Vec<bool>> = evaluated
        .par_iter()
        .map(|entries| {
            if index.len() < 2 {
                return Vec::new();
            }
            index
                .self_nearest_batch(entries)
                .iter()
                .zip(entries)
                .map(|(nearest, &id)| {
                    nearest.expect("index has >= 2 entries").value != values[id as usize]
                })
                .collect()
        })
        .collect();
    let mut report = DiagnosticsReport::empty(bins);
    let mut contaminated = vec![0u64; bins.n_bins()];
    for (t, entries) in by_type.iter().enumerate() {
        if entries.is_empty() {
            continue;
        }
        let b = bins.bin_of(entries.len() as u64);
        report.rows[b].n_obs += flags[t].len() as u64;
        contaminated[b] += flags[t].iter().filter(|&&f| f).count() as u64;
    }
    for (b, row) in report.rows.iter_mut().enumerate() {
        if row.n_obs > 0 {
            row.contamination = Some(contaminated[b] as f64 / row.n_obs as f64);
        }
    }
    report
}

/// Mean reconstruction error of one token type's datastore entries.
#[derive(Clone, Debug, PartialEq)]
pub struct TypeErrorRow {
    pub token_id: u32,
    pub freq: u64,
    pub mean_error: f64,
}

/// Per-bin mean reconstruction error pooled over entries, plus the
/// per-type mean error table (one row per type with at least one entry,
/// ascending token id). `errors[i]` is the reconstruction error of
/// datastore entry `i`.
pub fn pq_error_report(
    errors: &[f64],
    values: &[u32],
    vocab_size: u32,
    bins: &FrequencyBins,
) -> (DiagnosticsReport, Vec<TypeErrorRow>) {
    assert_eq!(errors.len(), values.len(), "one error per datastore entry");
    let by_type = entries_by_type(values, vocab_size);
    let mut report = DiagnosticsReport::empty(bins);
    let mut sums = vec![0f64; bins.n_bins()];
    let mut table = Vec::new();
    for (t, entries) in by_type.iter().enumerate() {
        if entries.is_empty() {
            continue;
        }
        let b = bins.bin_of(entries.len() as u64);
        report.rows[b].n_obs += entries.len() as u64;
        let type_sum: f64 = entries.iter().map(|&id| errors[id as usize]).sum();
        sums[b] += type_sum;
        table.push(TypeErrorRow {
            token_id: t as u32,
            freq: entries.len() as u64,
            mean_error: type_sum / entries.len() as f64,
        });
    }
    for (b, row) in report.rows.iter_mut().enumerate() {
        if row.n_obs > 0 {
            row.mean_pq_error = Some(sums[b] / row.n_obs as f64);
        }
    }
    (report, table)
}
