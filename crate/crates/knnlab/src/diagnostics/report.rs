//! Per-bin report rows and the CSV layout shared by all binned reports.
//!
//! Every report uses the same nine columns; a report fills only the
//! columns its metric defines and leaves the rest blank, so downstream
//! plotting can treat all report files uniformly.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::FrequencyBins;
use crate::error::{Error, Result};
use crate::knnlm::EvalRecord;

pub const REPORT_HEADER: &str =
    "bin_lo,bin_hi,n_obs,mean_p_knn,mean_p_lm,hit_rate,mean_cv,contamination,mean_pq_error";

/// One frequency bin of a report. `None` renders as a blank CSV cell:
/// the metric is not defined for this bin (or not part of this report).
#[derive(Clone, Debug, PartialEq)]
pub struct BinRow {
    pub bin_lo: u64,
    pub bin_hi: u64,
    pub n_obs: u64,
    pub mean_p_knn: Option<f64>,
    pub mean_p_lm: Option<f64>,
    pub hit_rate: Option<f64>,
    pub mean_cv: Option<f64>,
    pub contamination: Option<f64>,
    pub mean_pq_error: Option<f64>,
}

impl BinRow {
    /// A row with the bin range set and every metric column blank.
    pub fn empty(bounds: (u64, u64)) -> Self {
        BinRow {
            bin_lo: bounds.0,
            bin_hi: bounds.1,
            n_obs: 0,
            mean_p_knn: None,
            mean_p_lm: None,
            hit_rate: None,
            mean_cv: None,
            contamination: None,
            mean_pq_error: None,
        }
    }
}

/// A binned report: one row per bin, in bin order (zero bin first).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DiagnosticsReport {
    pub rows: Vec<BinRow>,
}

impl DiagnosticsReport {
    /// All-blank rows covering every bin.
    pub fn empty(bins: &FrequencyBins) -> Self {
        DiagnosticsReport {
            rows: (0..bins.n_bins()).map(|b| BinRow::empty(bins.bounds(b))).collect(),
        }
    }

    /// Total observations across bins; each metric's reports conserve
    /// this against its own population (eval positions or datastore
    /// entries).
    pub fn total_obs(&self) -> u64 {
        self.rows.iter().map(|r| r.n_obs).sum()
    }
}

/// Which per-record frequency a record report stratifies on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FreqKey {
    Datastore,
    Pretrain,
}

impl FreqKey {
    fn of(self, r: &EvalRecord) -> u64 {
        match self {
            FreqKey::Datastore => r.freq_datastore,
            FreqKey::Pretrain => r.freq_pretrain,
        }
    }
}

/// Mean retrieved and base probabilities per frequency bin, averaged
/// arithmetically over test occurrences (not over types).
pub fn expected_prob_by_bin(
    records: &[EvalRecord],
    bins: &FrequencyBins,
    key: FreqKey,
) -> DiagnosticsReport {
    let mut report = DiagnosticsReport::empty(bins);
    let mut knn_sum = vec![0f64; bins.n_bins()];
    let mut lm_sum = vec![0f64; bins.n_bins()];
    for r in records {
        let b = bins.bin_of(key.of(r));
        report.rows[b].n_obs += 1;
        knn_sum[b] += r.p_knn;
        lm_sum[b] += r.p_lm;
    }
    for (b, row) in report.rows.iter_mut().enumerate() {
        if row.n_obs > 0 {
            row.mean_p_knn = Some(knn_sum[b] / row.n_obs as f64);
            row.mean_p_lm = Some(lm_sum[b] / row.n_obs as f64);
        }
    }
    report
}

/// Fraction of test occurrences per bin whose retrieved neighbor set
/// contained the target token.
pub fn hit_rate_by_bin(
    records: &[EvalRecord],
    bins: &FrequencyBins,
    key: FreqKey,
) -> DiagnosticsReport {
    let mut report = DiagnosticsReport::empty(bins);
    let mut hits = vec![0u64; bins.n_bins()];
    for r in records {
        let b = bins.bin_of(key.of(r));
        report.rows[b].n_obs += 1;
        if r.hit {
            hits[b] += 1;
        }
    }
    for (b, row) in report.rows.iter_mut().enumerate() {
        if row.n_obs > 0 {
            row.hit_rate = Some(hits[b] as f64 / row.n_obs as f64);
        }
    }
    report
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn emit_report(path: &Path, report: &DiagnosticsReport) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{REPORT_HEADER}")?;
    for r in &report.rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            r.bin_lo,
            r.bin_hi,
            r.n_obs,
            cell(r.mean_p_knn),
            cell(r.mean_p_lm),
            cell(r.hit_rate),
            cell(r.mean_cv),
            cell(r.contamination),
            cell(r.mean_pq_error),
        )?;
    }
    w.flush()?;
    Ok(())
}

fn parse_cell(path: &Path, lineno: usize, field: &str, what: &str) -> Result<Option<f64>> {
    if field.is_empty() {
        return Ok(None);
    }
    field.parse::<f64>().map(Some).map_err(|_| {
        Error::Data(format!("{}: line {lineno}: bad {what} '{field}'", path.display()))
    })
}

pub fn read_report(path: &Path) -> Result<DiagnosticsReport> {
    let mut lines = BufReader::new(File::open(path)?).lines();
    let header = lines
        .next()
        .transpose()?
        .ok_or_else(|| Error::Data(format!("{}: empty report file", path.display())))?;
    if header.trim_end() != REPORT_HEADER {
        return Err(Error::Data(format!("{}: unexpected report header", path.display())));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let lineno = i + 2;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(Error::Data(format!(
                "{}: line {lineno}: expected 9 fields, got {}",
                path.display(),
                fields.len()
            )));
        }
        let int = |f: &str, what: &str| -> Result<u64> {
            f.parse().map_err(|_| {
                Error::Data(format!("{}: line {lineno}: bad {what} '{f}'", path.display()))
            })
        };
        rows.push(BinRow {
            bin_lo: int(fields[0], "bin_lo")?,
            bin_hi: int(fields[1], "bin_hi")?,
            n_obs: int(fields[2], "n_obs")?,
            mean_p_knn: parse_cell(path, lineno, fields[3], "mean_p_knn")?,
            mean_p_lm: parse_cell(path, lineno, fields[4], "mean_p_lm")?,
            hit_rate: parse_cell(path, lineno, fields[5], "hit_rate")?,
            mean_cv: parse_cell(path, lineno, fields[6], "mean_cv")?,
            contamination: parse_cell(path, lineno, fields[7], "contamination")?,
            mean_pq_error: parse_cell(path, lineno, fields[8], "mean_pq_error")?,
        });
    }
    Ok(DiagnosticsReport { rows })
}
