//! Logarithmic frequency bins.
//!
//! Counts are stratified into base-10 log bins — classic one-per-decade
//! bins or a finer grid (default 8 per decade) — plus a dedicated bin for
//! count 0, so the bin map is total over u64 counts.

use crate::error::{Error, Result};

/// Strictly increasing integer bin edges over positive counts. Bin 0 is
/// the zero-count bin; bin `j >= 1` covers `[edges[j-1], edges[j])`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FrequencyBins {
    edges: Vec<u64>,
}

impl FrequencyBins {
    /// Build edges at `ceil(10^(i / per_decade))` (deduplicated, since
    /// neighboring fractional edges collapse for small counts) until they
    /// cover `max_count`. Exact powers of ten are computed in integer
    /// arithmetic so decade boundaries never drift.
    pub fn new(per_decade: u32, max_count: u64) -> Result<Self> {
        if per_decade == 0 || per_decade > 64 {
            return Err(Error::InvalidInput(format!(
                "bins per decade must be in 1..=64, got {per_decade}"
            )));
        }
        let mut edges = vec![1u64];
        let mut i = 1u32;
        loop {
            let last = *edges.last().unwrap();
            if last > max_count && edges.len() >= 2 {
                break;
            }
            let decade = i / per_decade;
            let step = i % per_decade;
            let edge = if step == 0 {
                match 10u64.checked_pow(decade) {
                    Some(v) => v,
                    None => break,
                }
            } else {
                let exact = 10f64.powf(f64::from(decade) + f64::from(step) / f64::from(per_decade));
                if exact >= 1e18 {
                    break;
                }
                exact.ceil() as u64
            };
            if edge > last {
                edges.push(edge);
            }
            i += 1;
        }
        Ok(FrequencyBins { edges })
    }

    /// One bin per power of ten.
    pub fn decades(max_count: u64) -> Self {
        FrequencyBins::new(1, max_count).expect("1 bin per decade is always valid")
    }

    /// Total number of bins including the zero bin.
    pub fn n_bins(&self) -> usize {
        self.edges.len()
    }

    /// Bin index for a count. Total: 0 maps to the zero bin and counts
    /// past the last edge clamp into the last bin.
    pub fn bin_of(&self, count: u64) -> usize {
        if count == 0 {
            return 0;
        }
        let idx = self.edges.partition_point(|&e| e <= count);
        idx.min(self.edges.len() - 1)
    }

    /// Inclusive (lo, hi) count range of a bin. Panics on out-of-range
    /// bin indices, which always indicate an internal bug.
    pub fn bounds(&self, bin: usize) -> (u64, u64) {
        assert!(bin < self.n_bins(), "bin {bin} out of range");
        if bin == 0 {
            (0, 0)
        } else {
            (self.edges[bin - 1], self.edges[bin] - 1)
        }
    }
}
