//! Product quantization: split vectors into contiguous subspaces and
//! quantize each against its own k-means codebook.

use super::{kmeans, KmeansConfig};
use crate::error::{Error, Result};
use crate::util::{mix64, Matrix};

/// Per-subspace codebooks. Codes are stored one byte per subspace
/// regardless of `code_bits`, so `code_bits` may be at most 8.
#[derive(Clone, Debug)]
pub struct PqCodebook {
    m: usize,
    dsub: usize,
    ksub: usize,
    /// m matrices of ksub × dsub.
    codebooks: Vec<Matrix>,
    /// Transposed copy of each codebook (`j * ksub + code` holds dimension
    /// `j` of codeword `code`), so per-dimension sweeps over all codewords
    /// are unit-stride. Derived from `codebooks`, never stored separately.
    tcodebooks: Vec<Vec<f32>>,
}

fn transpose(book: &Matrix) -> Vec<f32> {
    let ksub = book.rows();
    let mut t = vec![0.0f32; ksub * book.dim()];
    for (code, row) in book.iter_rows().enumerate() {
        for (j, &x) in row.iter().enumerate() {
            t[j * ksub + code] = x;
        }
    }
    t
}

/// Train per-subspace codebooks on the given vectors (for an inverted-file
/// index these are residuals against the coarse centroids).
///
/// If the training set has fewer rows than `2^code_bits`, the codebook is
/// padded by repeating its first centroid; padded entries are never
/// selected by `encode` because ties break to the lower code.
pub fn train_pq(
    data: &Matrix,
    m: usize,
    code_bits: u32,
    kmeans_iters: usize,
    seed: u64,
) -> Result<PqCodebook> {
    if m == 0 {
        return Err(Error::InvalidInput("product quantizer needs at least one subspace".into()));
    }
    if !(1..=8).contains(&code_bits) {
        return Err(Error::InvalidInput(format!("code_bits must be in 1..=8, got {code_bits}")));
    }
    let dim = data.dim();
    if dim % m != 0 {
        return Err(Error::InvalidInput(format!(
            "dimension {dim} is not divisible by {m} subspaces"
        )));
    }
    if data.rows() == 0 {
        return Err(Error::InvalidInput("cannot train a product quantizer on no vectors".into()));
    }
    let dsub = dim / m;
    let ksub = 1usize << code_bits;
    let k_eff = ksub.min(data.rows());
    let mut codebooks = Vec::with_capacity(m);
    for sub in 0..m {
        let mut subdata = Matrix::new(dsub);
        for row in data.iter_rows() {
            subdata.push_row(&row[sub * dsub..(sub + 1) * dsub]);
        }
        let mut cfg = KmeansConfig::new(k_eff, mix64(seed ^ (sub as u64 + 1)));
        cfg.max_iters = kmeans_iters;
        let result = kmeans(&subdata, &cfg)?;
        let mut book = result.centroids;
        while book.rows() < ksub {
            let first = book.row(0).to_vec();
            book.push_row(&first);
        }
        codebooks.push(book);
    }
    Ok(PqCodebook::assemble(m, dsub, ksub, codebooks))
}

impl PqCodebook {
    fn assemble(m: usize, dsub: usize, ksub: usize, codebooks: Vec<Matrix>) -> Self {
        let tcodebooks = codebooks.iter().map(transpose).collect();
        PqCodebook { m, dsub, ksub, codebooks, tcodebooks }
    }

    pub fn subspaces(&self) -> usize {
        self.m
    }

    pub fn subdim(&self) -> usize {
        self.dsub
    }

    pub fn codebook_size(&self) -> usize {
        self.ksub
    }

    pub fn dim(&self) -> usize {
        self.m * self.dsub
    }

    pub fn codebooks(&self) -> &[Matrix] {
        &self.codebooks
    }

    /// Rebuild from raw centroid matrices (file loading).
    pub fn from_parts(codebooks: Vec<Matrix>) -> Result<Self> {
        if codebooks.is_empty() {
            return Err(Error::Data("product quantizer has no codebooks".into()));
        }
        let ksub = codebooks[0].rows();
        let dsub = codebooks[0].dim();
        if !ksub.is_power_of_two() || ksub > 256 || ksub == 0 {
            return Err(Error::Data(format!("invalid codebook size {ksub}")));
        }
        if codebooks.iter().any(|c| c.rows() != ksub || c.dim() != dsub) {
            return Err(Error::Data("codebook shapes disagree across subspaces".into()));
        }
        Ok(PqCodebook::assemble(codebooks.len(), dsub, ksub, codebooks))
    }

    /// Squared distance from `piece` to every codeword of subspace `sub`,
    /// written to `out[code]`. Each entry is bit-identical to calling
    /// [`squared_l2`](crate::util::squared_l2) on the pair: dimension `j`
    /// accumulates into lane `j % 8` in ascending order and the lanes merge
    /// by the same pairwise tree, only swept codeword-parallel instead of
    /// one pair at a time.
    fn distance_rows_into(&self, sub: usize, piece: &[f32], out: &mut [f32]) {
        const BLOCK: usize = 64;
        debug_assert_eq!(piece.len(), self.dsub);
        debug_assert_eq!(out.len(), self.ksub);
        let t = &self.tcodebooks[sub];
        let mut lanes = [[0.0f32; BLOCK]; 8];
        let mut base = 0;
        while base < self.ksub {
            let w = BLOCK.min(self.ksub - base);
            for l in 0..8 {
                if l < self.dsub {
                    let x = piece[l];
                    let col = &t[l * self.ksub + base..][..w];
                    for (lane, &c) in lanes[l][..w].iter_mut().zip(col) {
                        let d = x - c;
                        *lane = d * d;
                    }
                } else {
                    lanes[l][..w].fill(0.0);
                }
            }
            for j in 8..self.dsub {
                let x = piece[j];
                let col = &t[j * self.ksub + base..][..w];
                for (lane, &c) in lanes[j % 8][..w].iter_mut().zip(col) {
                    let d = x - c;
                    *lane += d * d;
                }
            }
            for i in 0..w {
                out[base + i] = ((lanes[0][i] + lanes[1][i]) + (lanes[2][i] + lanes[3][i]))
                    + ((lanes[4][i] + lanes[5][i]) + (lanes[6][i] + lanes[7][i]));
            }
            base += w;
        }
    }

    /// Quantize one vector: per subspace, the nearest centroid's code
    /// (ties to the lower code).
    pub fn encode_into(&self, v: &[f32], out: &mut [u8]) {
        assert_eq!(v.len(), self.dim());
        assert_eq!(out.len(), self.m);
        let mut dists = [0.0f32; 256]; // ksub is at most 2^8
        for sub in 0..self.m {
            let piece = &v[sub * self.dsub..(sub + 1) * self.dsub];
            let row = &mut dists[..self.ksub];
            self.distance_rows_into(sub, piece, row);
            // Forward scan with a strict compare keeps the first minimum,
            // i.e. ties go to the lower code.
            let mut best = 0usize;
            for (code, &d) in row.iter().enumerate().skip(1) {
                if d < row[best] {
                    best = code;
                }
            }
            out[sub] = best as u8;
        }
    }

    pub fn encode(&self, v: &[f32]) -> Vec<u8> {
        let mut out = vec![0u8; self.m];
        self.encode_into(v, &mut out);
        out
    }

    /// Reconstruct the quantized vector for a code sequence.
    pub fn decode_into(&self, codes: &[u8], out: &mut [f32]) {
        assert_eq!(codes.len(), self.m);
        assert_eq!(out.len(), self.dim());
        for sub in 0..self.m {
            let centroid = self.codebooks[sub].row(codes[sub] as usize);
            out[sub * self.dsub..(sub + 1) * self.dsub].copy_from_slice(centroid);
        }
    }

    pub fn decode(&self, codes: &[u8]) -> Vec<f32> {
        let mut out = vec![0.0f32; self.dim()];
        self.decode_into(codes, &mut out);
        out
    }

    /// Asymmetric-distance table for one query: entry `sub * ksub + code`
    /// holds the squared distance between the query's subvector and that
    /// centroid. Summing M entries gives the quantized squared distance.
    pub fn lookup_table(&self, query: &[f32]) -> Vec<f32> {
        assert_eq!(query.len(), self.dim());
        let mut table = vec![0.0f32; self.m * self.ksub];
        for sub in 0..self.m {
            let piece = &query[sub * self.dsub..(sub + 1) * self.dsub];
            self.distance_rows_into(sub, piece, &mut table[sub * self.ksub..(sub + 1) * self.ksub]);
        }
        table
    }

    /// Quantized squared distance from a lookup table, summed in fixed
    /// subspace order.
    #[inline]
    pub fn adc_distance(&self, table: &[f32], codes: &[u8]) -> f32 {
        let mut d = 0.0f32;
        for (sub, &code) in codes.iter().enumerate() {
            d += table[sub * self.ksub + code as usize];
        }
        d
    }
}
