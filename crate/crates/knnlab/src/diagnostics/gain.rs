//! Per-type prediction gain joined with per-type quantization error.
//!
//! For each token type: the mean of `p_knn - p_lm` over its test
//! occurrences, paired with its mean reconstruction error. Types missing
//! from either side are dropped and counted, never silently ignored.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::metrics::TypeErrorRow;
use super::stats::{correlate, CorrMethod};
use crate::error::{Error, Result};
use crate::knnlm::EvalRecord;

pub const GAIN_TABLE_HEADER: &str = "token_id,freq,mean_gain,mean_pq_error";

#[derive(Clone, Debug, PartialEq)]
pub struct GainErrorRow {
    pub token_id: u32,
    /// Datastore frequency of the type.
    pub freq: u64,
    /// Mean of p_knn - p_lm over the type's test occurrences.
    pub mean_gain: f64,
    pub mean_pq_error: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GainErrorTable {
    /// Ascending token id; only types present on both sides.
    pub rows: Vec<GainErrorRow>,
    /// Types with test occurrences but no datastore entries.
    pub dropped_without_error: u64,
    /// Types with datastore entries but no test occurrences.
    pub dropped_without_gain: u64,
}

pub fn gain_vs_error(records: &[EvalRecord], errors: &[TypeErrorRow]) -> GainErrorTable {
    let mut gain_sum: HashMap<u32, (f64, u64)> = HashMap::new();
    for r in records {
        let e = gain_sum.entry(r.target_id).or_insert((0.0, 0));
        e.0 += r.p_knn - r.p_lm;
        e.1 += 1;
    }
    let mut table = GainErrorTable::default();
    let mut matched = 0u64;
    for err in errors {
        match gain_sum.get(&err.token_id) {
            Some(&(sum, n)) => {
                matched += 1;
                table.rows.push(GainErrorRow {
                    token_id: err.token_id,
                    freq: err.freq,
                    mean_gain: sum / n as f64,
                    mean_pq_error: err.mean_error,
                });
            }
            None => table.dropped_without_gain += 1,
        }
    }
    table.dropped_without_error = gain_sum.len() as u64 - matched;
    table
}

/// (Pearson, Spearman) between mean gain and mean reconstruction error
/// over the joined types. `None` per coefficient when undefined (zero
/// variance, or fewer than 2 joined types).
pub fn gain_error_correlations(table: &GainErrorTable) -> (Option<f64>, Option<f64>) {
    if table.rows.len() < 2 {
        return (None, None);
    }
    let gains: Vec<f64> = table.rows.iter().map(|r| r.mean_gain).collect();
    let errs: Vec<f64> = table.rows.iter().map(|r| r.mean_pq_error).collect();
    let pearson = correlate(&gains, &errs, CorrMethod::Pearson)
        .expect("lengths match and values are finite");
    let spearman = correlate(&gains, &errs, CorrMethod::Spearman)
        .expect("lengths match and values are finite");
    (pearson, spearman)
}

pub fn write_gain_table(path: &Path, table: &GainErrorTable) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{GAIN_TABLE_HEADER}")?;
    for r in &table.rows {
        writeln!(w, "{},{},{},{}", r.token_id, r.freq, r.mean_gain, r.mean_pq_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_gain_table(path: &Path) -> Result<Vec<GainErrorRow>> {
    let mut lines = BufReader::new(File::open(path)?).lines();
    let header = lines
        .next()
        .transpose()?
        .ok_or_else(|| Error::Data(format!("{}: empty table file", path.display())))?;
    if header.trim_end() != GAIN_TABLE_HEADER {
        return Err(Error::Data(format!("{}: unexpected table header", path.display())));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let bad = || Error::Data(format!("{}: line {}: bad row", path.display(), i + 2));
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(bad());
        }
        rows.push(GainErrorRow {
            token_id: fields[0].parse().map_err(|_| bad())?,
            freq: fields[1].parse().map_err(|_| bad())?,
            mean_gain: fields[2].parse().map_err(|_| bad())?,
            mean_pq_error: fields[3].parse().map_err(|_| bad())?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(target: u32, p_lm: f64, p_knn: f64) -> EvalRecord {
        EvalRecord {
            position: 0,
            target_id: target,
            freq_datastore: 1,
            freq_pretrain: 1,
            p_lm,
            p_knn,
            p_interp: 0.0,
            hit: false,
            ctx_ngram_counts: [0; 5],
        }
    }

    fn error_row(t: u32, freq: u64, e: f64) -> TypeErrorRow {
        TypeErrorRow { token_id: t, freq, mean_error: e }
    }

    #[test]
    fn joins_types_and_counts_drops_on_both_sides() {
        let records = vec![
            record(1, 0.2, 0.4),
            record(1, 0.1, 0.5),
            record(2, 0.3, 0.3),
            record(9, 0.5, 0.0), // no error entry -> dropped
        ];
        let errors = vec![
            error_row(1, 10, 0.25),
            error_row(2, 5, 1.5),
            error_row(7, 3, 2.0), // never a test target -> dropped
        ];
        let table = gain_vs_error(&records, &errors);
        assert_eq!(table.rows.len(), 2);
        assert_eq!(table.dropped_without_error, 1);
        assert_eq!(table.dropped_without_gain, 1);
        let r1 = &table.rows[0];
        assert_eq!((r1.token_id, r1.freq), (1, 10));
        assert!((r1.mean_gain - 0.3).abs() < 1e-15);
        assert_eq!(r1.mean_pq_error, 0.25);
        assert!((table.rows[1].mean_gain - 0.0).abs() < 1e-15);
    }

    #[test]
    fn equal_gains_make_pearson_undefined() {
        // Dyadic probabilities so every gain is exactly 0.25 in f64.
        let records =
            vec![record(0, 0.25, 0.5), record(1, 0.125, 0.375), record(2, 0.0, 0.25)];
        let errors = vec![error_row(0, 1, 0.5), error_row(1, 2, 1.5), error_row(2, 3, 2.5)];
        let table = gain_vs_error(&records, &errors);
        let (pearson, spearman) = gain_error_correlations(&table);
        assert_eq!(pearson, None);
        assert_eq!(spearman, None);
    }

    #[test]
    fn correlations_match_direct_computation_on_hand_built_pairs() {
        let records = vec![record(0, 0.0, 0.1), record(1, 0.0, 0.4), record(2, 0.0, 0.2)];
        let errors = vec![error_row(0, 1, 3.0), error_row(1, 2, 1.0), error_row(2, 3, 2.0)];
        let table = gain_vs_error(&records, &errors);
        let (pearson, spearman) = gain_error_correlations(&table);
        let want_p =
            correlate(&[0.1, 0.4, 0.2], &[3.0, 1.0, 2.0], CorrMethod::Pearson).unwrap();
        let want_s =
            correlate(&[0.1, 0.4, 0.2], &[3.0, 1.0, 2.0], CorrMethod::Spearman).unwrap();
        assert_eq!(pearson, want_p);
        assert_eq!(spearman, want_s);
        assert_eq!(spearman, Some(-1.0));
    }

    #[test]
    fn table_round_trips_through_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gain.csv");
        let table = GainErrorTable {
            rows: vec![
                GainErrorRow { token_id: 3, freq: 17, mean_gain: -0.125, mean_pq_error: 0.75 },
                GainErrorRow { token_id: 9, freq: 1, mean_gain: 0.1, mean_pq_error: 1.25 },
            ],
            dropped_without_error: 0,
            dropped_without_gain: 2,
        };
        write_gain_table(&path, &table).unwrap();
        assert_eq!(read_gain_table(&path).unwrap(), table.rows);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("token_id,freq,mean_gain,mean_pq_error\n"));
    }

    #[test]
    fn fewer_than_two_joined_types_yield_no_coefficients() {
        let table = gain_vs_error(&[record(0, 0.1, 0.2)], &[error_row(0, 1, 0.5)]);
        assert_eq!(gain_error_correlations(&table), (None, None));
    }
}
