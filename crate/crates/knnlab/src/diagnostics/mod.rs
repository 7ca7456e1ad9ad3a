//! Frequency-stratified analyses of retrieval quality: expected
//! probabilities, hit rates, key-cloud dispersion, nearest-neighbor
//! contamination, and quantization error, each aggregated over
//! logarithmic token-frequency bins into plot-ready CSV reports.

mod bins;
mod gain;
mod metrics;
mod report;
mod stats;
mod sweep;
mod tertiles;

pub use bins::FrequencyBins;
pub use gain::{
    gain_error_correlations, gain_vs_error, read_gain_table, write_gain_table, GainErrorRow,
    GainErrorTable, GAIN_TABLE_HEADER,
};
pub use metrics::{
    centroid_cv, contamination_rate, contamination_report, cv_report, entries_by_type,
    pq_error_report, TypeErrorRow,
};
pub use report::{
    emit_report, expected_prob_by_bin, hit_rate_by_bin, read_report, BinRow, DiagnosticsReport,
    FreqKey, REPORT_HEADER,
};
pub use stats::{average_ranks, correlate, CorrMethod};
pub use sweep::{
    read_sweep_csv, sweep, tertile_summary, write_sweep_csv, SweepPoint, SweepRow, SWEEP_HEADER,
};
pub use tertiles::{categorize_tertiles, Tertile, TertileCategories};
