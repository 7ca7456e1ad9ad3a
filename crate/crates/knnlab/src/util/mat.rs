//! Flat row-major f32 matrix and the one distance kernel everything shares.

use crate::error::{Error, Result};

/// Dense row-major matrix of f32 with a fixed row width.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    data: Vec<f32>,
    dim: usize,
}

impl Matrix {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "matrix dim must be positive");
        Matrix { data: Vec::new(), dim }
    }

    pub fn with_capacity(dim: usize, rows: usize) -> Self {
        assert!(dim > 0, "matrix dim must be positive");
        Matrix { data: Vec::with_capacity(rows * dim), dim }
    }

    pub fn zeros(rows: usize, dim: usize) -> Self {
        assert!(dim > 0, "matrix dim must be positive");
        Matrix { data: vec![0.0; rows * dim], dim }
    }

    pub fn from_vec(data: Vec<f32>, dim: usize) -> Result<Self> {
        if dim == 0 || data.len() % dim != 0 {
            return Err(Error::InvalidInput(format!(
                "matrix data length {} is not a multiple of dim {}",
                data.len(),
                dim
            )));
        }
        Ok(Matrix { data, dim })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.data.len() / self.dim
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f32] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn push_row(&mut self, row: &[f32]) {
        assert_eq!(row.len(), self.dim);
        self.data.extend_from_slice(row);
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn iter_rows(&self) -> impl ExactSizeIterator<Item = &[f32]> {
        self.data.chunks_exact(self.dim)
    }
}

/// Squared L2 distance with a fixed summation order: eight independent lanes
/// over chunks of eight, remainder appended lane-wise, lanes merged pairwise.
///
/// The order never depends on data values or thread count, so repeated calls
/// are bit-identical — the brute-force oracle and every index share this
/// kernel. The lane layout also lets the compiler vectorize without being
/// allowed to reassociate anything.
#[inline]
pub fn squared_l2(a: &[f32], b: &[f32]) -> f32 {
    debug_assert_eq!(a.len(), b.len());
    let mut lanes = [0f32; 8];
    for (ca, cb) in a.chunks_exact(8).zip(b.chunks_exact(8)) {
        for l in 0..8 {
            let d = ca[l] - cb[l];
            lanes[l] += d * d;
        }
    }
    let ra = a.chunks_exact(8).remainder();
    let rb = b.chunks_exact(8).remainder();
    for (l, (x, y)) in ra.iter().zip(rb).enumerate() {
        let d = x - y;
        lanes[l] += d * d;
    }
    ((lanes[0] + lanes[1]) + (lanes[2] + lanes[3])) + ((lanes[4] + lanes[5]) + (lanes[6] + lanes[7]))
}

/// Squared L2 distance under the same summation order as [`squared_l2`],
/// abandoning the scan at doubling checkpoints (after 1, 2, 4, … chunks)
/// once the partial distance already reaches `bound`.
///
/// Whenever the true distance is below `bound`, the return value is that
/// distance, bit for bit — the lanes keep accumulating in the identical
/// order and the final merge is the identical expression. A return at or
/// above `bound` promises only that the true distance is also at or above
/// `bound`. Both guarantees hold because every lane accumulates
/// nonnegative terms (correctly-rounded f32 addition of a nonnegative
/// value never decreases a sum) and the pairwise merge is monotone in
/// each argument, so a checkpoint's merged partial never overstates the
/// final sum.
#[inline]
pub(crate) fn squared_l2_bounded(a: &[f32], b: &[f32], bound: f32) -> f32 {
    debug_assert_eq!(a.len(), b.len());
    #[inline]
    fn merge(lanes: &[f32; 8]) -> f32 {
        ((lanes[0] + lanes[1]) + (lanes[2] + lanes[3]))
            + ((lanes[4] + lanes[5]) + (lanes[6] + lanes[7]))
    }
    let mut lanes = [0f32; 8];
    let mut done = 0usize;
    let mut checkpoint = 1usize;
    for (ca, cb) in a.chunks_exact(8).zip(b.chunks_exact(8)) {
        for l in 0..8 {
            let d = ca[l] - cb[l];
            lanes[l] += d * d;
        }
        done += 1;
        if done == checkpoint {
            let partial = merge(&lanes);
            if partial >= bound {
                return partial;
            }
            checkpoint *= 2;
        }
    }
    let ra = a.chunks_exact(8).remainder();
    let rb = b.chunks_exact(8).remainder();
    for (l, (x, y)) in ra.iter().zip(rb).enumerate() {
        let d = x - y;
        lanes[l] += d * d;
    }
    merge(&lanes)
}

/// Squared L2 norm under the same summation order as [`squared_l2`].
#[inline]
pub fn squared_norm(a: &[f32]) -> f32 {
    let mut lanes = [0f32; 8];
    for ca in a.chunks_exact(8) {
        for l in 0..8 {
            lanes[l] += ca[l] * ca[l];
        }
    }
    for (l, x) in a.chunks_exact(8).remainder().iter().enumerate() {
        lanes[l] += x * x;
    }
    ((lanes[0] + lanes[1]) + (lanes[2] + lanes[3])) + ((lanes[4] + lanes[5]) + (lanes[6] + lanes[7]))
}
