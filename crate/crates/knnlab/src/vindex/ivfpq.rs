//! Inverted-file index with product-quantized residuals.
//!
//! Keys are partitioned by nearest coarse centroid; each entry stores the
//! product-quantization code of its residual against that centroid plus
//! its value token. Queries probe the `nprobe` nearest coarse lists and
//! rank entries by asymmetric (table-lookup) distance.

use rayon::prelude::*;

use super::{train_pq, DistId, Neighbor, NeighborSearch, NeighborSet, TopK};
use super::{kmeans, KmeansConfig, PqCodebook};
use crate::error::{Error, Result};
use crate::util::{mix64, squared_l2, Matrix, SplitMix64};

const CHUNK_ROWS: usize = 4096;

#[derive(Clone, Debug)]
pub struct IvfPqConfig {
    /// Number of coarse (inverted-list) centroids. Clamped to the number
    /// of indexed vectors.
    pub coarse_clusters: usize,
    /// Product-quantization subspaces; must divide the key dimension.
    pub subspaces: usize,
    /// Bits per subspace code (1..=8).
    pub code_bits: u32,
    /// Lloyd iteration cap for both coarse and subspace k-means.
    pub kmeans_iters: usize,
    /// Vectors sampled (without replacement) for k-means training;
    /// 0 means train on every vector.
    pub train_sample: usize,
    pub seed: u64,
}

impl Default for IvfPqConfig {
    fn default() -> Self {
        IvfPqConfig {
            coarse_clusters: 256,
            subspaces: 8,
            code_bits: 8,
            kmeans_iters: 25,
            train_sample: 65_536,
            seed: 42,
        }
    }
}

/// One inverted list: parallel arrays, ids ascending.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct IvfList {
    pub ids: Vec<u32>,
    pub values: Vec<u32>,
    /// Entry codes, `subspaces` bytes each, concatenated.
    pub codes: Vec<u8>,
}

#[derive(Clone, Debug)]
pub struct IvfPqIndex {
    dim: usize,
    code_bits: u32,
    coarse: Matrix,
    pq: PqCodebook,
    lists: Vec<IvfList>,
    /// id -> (list, position within list).
    loc: Vec<(u32, u32)>,
}

/// Nearest coarse centroid per row, computed in deterministic parallel
/// chunks.
fn coarse_assign(keys: &Matrix, coarse: &Matrix) -> Vec<u32> {
    let dim = keys.dim();
    keys.data()
        .par_chunks(CHUNK_ROWS * dim)
        .map(|chunk| {
            chunk
                .chunks_exact(dim)
                .map(|row| {
                    let mut best = DistId { dist: f32::INFINITY, id: 0 };
                    for (c, centroid) in coarse.iter_rows().enumerate() {
                        let cand = DistId { dist: squared_l2(row, centroid), id: c as u32 };
                        if cand < best {
                            best = cand;
                        }
                    }
                    best.id
                })
                .collect::<Vec<u32>>()
        })
        .collect::<Vec<Vec<u32>>>()
        .concat()
}

impl IvfPqIndex {
    /// Build an index over `keys` (one value token per key).
    pub fn build(keys: &Matrix, values: &[u32], config: &IvfPqConfig) -> Result<IvfPqIndex> {
        let n = keys.rows();
        if n == 0 {
            return Err(Error::InvalidInput("cannot index an empty key set".into()));
        }
        if values.len() != n {
            return Err(Error::InvalidInput(format!(
                "got {n} keys but {} values",
                values.len()
            )));
        }
        if config.coarse_clusters == 0 {
            return Err(Error::InvalidInput("need at least one coarse cluster".into()));
        }
        let dim = keys.dim();
        let c_eff = config.coarse_clusters.min(n);

        // Training subset: deterministic shuffle, then restore id order so
        // downstream passes stay cache-friendly.
        let sample_rows: Option<Matrix> =
            if config.train_sample > 0 && config.train_sample < n {
                let mut idx: Vec<u32> = (0..n as u32).collect();
                SplitMix64::new(mix64(config.seed ^ 0x5a5a_5a5a)).shuffle(&mut idx);
                idx.truncate(config.train_sample);
                idx.sort_unstable();
                let mut m = Matrix::new(dim);
                for &i in &idx {
                    m.push_row(keys.row(i as usize));
                }
                Some(m)
            } else {
                None
            };
        let train_keys = sample_rows.as_ref().unwrap_or(keys);

        let mut coarse_cfg = KmeansConfig::new(c_eff.min(train_keys.rows()), mix64(config.seed ^ 1));
        coarse_cfg.max_iters = config.kmeans_iters;
        let coarse = kmeans(train_keys, &coarse_cfg)?.centroids;

        let assignments = coarse_assign(keys, &coarse);

        // Train the product quantizer on residuals of the training subset.
        let mut residuals = Matrix::new(dim);
        {
            let mut buf = vec![0.0f32; dim];
            for (i, row) in train_keys.iter_rows().enumerate() {
                // For the sampled case row i of train_keys is some key j;
                // its assignment is recomputed here (cheap relative to
                // k-means) to avoid carrying the index map around.
                let list = if sample_rows.is_some() {
                    let mut best = DistId { dist: f32::INFINITY, id: 0 };
                    for (c, centroid) in coarse.iter_rows().enumerate() {
                        let cand = DistId { dist: squared_l2(row, centroid), id: c as u32 };
                        if cand < best {
                            best = cand;
                        }
                    }
                    best.id
                } else {
                    assignments[i]
                };
                let centroid = coarse.row(list as usize);
                for ((b, x), c) in buf.iter_mut().zip(row).zip(centroid) {
                    *b = x - c;
                }
                residuals.push_row(&buf);
            }
        }
        let pq = train_pq(
            &residuals,
            config.subspaces,
            config.code_bits,
            config.kmeans_iters,
            mix64(config.seed ^ 2),
        )?;

        // Encode every key's residual, in deterministic parallel chunks.
        let m = config.subspaces;
        let codes: Vec<u8> = keys
            .data()
            .par_chunks(CHUNK_ROWS * dim)
            .enumerate()
            .map(|(chunk_no, chunk)| {
                let base = chunk_no * CHUNK_ROWS;
                let mut out = vec![0u8; (chunk.len() / dim) * m];
                let mut residual = vec![0.0f32; dim];
                for (r, row) in chunk.chunks_exact(dim).enumerate() {
                    let centroid = coarse.row(assignments[base + r] as usize);
                    for ((b, x), c) in residual.iter_mut().zip(row).zip(centroid) {
                        *b = x - c;
                    }
                    pq.encode_into(&residual, &mut out[r * m..(r + 1) * m]);
                }
                out
            })
            .collect::<Vec<Vec<u8>>>()
            .concat();

        let mut lists = vec![IvfList::default(); coarse.rows()];
        let mut loc = vec![(0u32, 0u32); n];
        for id in 0..n {
            let list = assignments[id] as usize;
            loc[id] = (list as u32, lists[list].ids.len() as u32);
            lists[list].ids.push(id as u32);
            lists[list].values.push(values[id]);
            lists[list].codes.extend_from_slice(&codes[id * m..(id + 1) * m]);
        }
        Ok(IvfPqIndex { dim, code_bits: config.code_bits, coarse, pq, lists, loc })
    }

    /// Reassemble an index from stored parts (file loading).
    pub fn from_parts(
        dim: usize,
        code_bits: u32,
        coarse: Matrix,
        pq: PqCodebook,
        lists: Vec<IvfList>,
    ) -> Result<IvfPqIndex> {
        if coarse.dim() != dim || pq.dim() != dim {
            return Err(Error::Data("index parts disagree on dimension".into()));
        }
        if lists.len() != coarse.rows() {
            return Err(Error::Data("one inverted list per coarse centroid required".into()));
        }
        let m = pq.subspaces();
        let n: usize = lists.iter().map(|l| l.ids.len()).sum();
        let mut loc = vec![(u32::MAX, 0u32); n];
        for (li, list) in lists.iter().enumerate() {
            if list.values.len() != list.ids.len() || list.codes.len() != list.ids.len() * m {
                return Err(Error::Data(format!("inverted list {li} has inconsistent arrays")));
            }
            for (pos, &id) in list.ids.iter().enumerate() {
                let slot = loc
                    .get_mut(id as usize)
                    .ok_or_else(|| Error::Data(format!("entry id {id} out of range")))?;
                if slot.0 != u32::MAX {
                    return Err(Error::Data(format!("entry id {id} appears twice")));
                }
                *slot = (li as u32, pos as u32);
            }
        }
        Ok(IvfPqIndex { dim, code_bits, coarse, pq, lists, loc })
    }

    pub fn len(&self) -> usize {
        self.loc.len()
    }

    pub fn is_empty(&self) -> bool {
        self.loc.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coarse_clusters(&self) -> usize {
        self.coarse.rows()
    }

    pub fn subspaces(&self) -> usize {
        self.pq.subspaces()
    }

    pub fn code_bits(&self) -> u32 {
        self.code_bits
    }

    pub fn coarse(&self) -> &Matrix {
        &self.coarse
    }

    pub fn pq(&self) -> &PqCodebook {
        &self.pq
    }

    pub fn lists(&self) -> &[IvfList] {
        &self.lists
    }

    /// Value token stored for a datastore entry.
    pub fn value(&self, id: u32) -> u32 {
        let (list, pos) = self.loc[id as usize];
        self.lists[list as usize].values[pos as usize]
    }

    /// Approximate key: coarse centroid plus decoded residual.
    pub fn reconstruct_into(&self, id: u32, out: &mut [f32]) {
        let (list, pos) = self.loc[id as usize];
        let l = &self.lists[list as usize];
        let m = self.pq.subspaces();
        let codes = &l.codes[pos as usize * m..(pos as usize + 1) * m];
        self.pq.decode_into(codes, out);
        for (o, c) in out.iter_mut().zip(self.coarse.row(list as usize)) {
            *o += c;
        }
    }

    pub fn reconstruct(&self, id: u32) -> Vec<f32> {
        let mut out = vec![0.0f32; self.dim];
        self.reconstruct_into(id, &mut out);
        out
    }

    /// Euclidean (not squared) distance between an entry's true key and
    /// its reconstruction.
    pub fn reconstruction_error(&self, id: u32, key: &[f32]) -> f64 {
        (squared_l2(key, &self.reconstruct(id)) as f64).sqrt()
    }

    /// Reconstruction error for every entry, id order. `keys` must be the
    /// matrix the index was built from.
    pub fn reconstruction_errors(&self, keys: &Matrix) -> Vec<f64> {
        assert_eq!(keys.rows(), self.len(), "key matrix does not match index size");
        (0..self.len() as u32)
            .into_par_iter()
            .map(|id| self.reconstruction_error(id, keys.row(id as usize)))
            .collect()
    }

    /// Probe the `nprobe` nearest coarse lists and return the `k` entries
    /// with smallest quantized distance, ties to lower id. `nprobe` is
    /// clamped to at least 1 and at most the number of lists.
    pub fn search(&self, query: &[f32], k: usize, nprobe: usize) -> NeighborSet {
        assert_eq!(query.len(), self.dim, "query has wrong dimension");
        let nprobe = nprobe.clamp(1, self.coarse.rows());
        let mut order: Vec<DistId> = self
            .coarse
            .iter_rows()
            .enumerate()
            .map(|(c, centroid)| DistId { dist: squared_l2(query, centroid), id: c as u32 })
            .collect();
        order.sort_unstable();
        order.truncate(nprobe);

        let m = self.pq.subspaces();
        let mut top = TopK::new(k);
        let mut residual = vec![0.0f32; self.dim];
        for probe in &order {
            let list = &self.lists[probe.id as usize];
            if list.ids.is_empty() {
                continue;
            }
            let centroid = self.coarse.row(probe.id as usize);
            for ((r, q), c) in residual.iter_mut().zip(query).zip(centroid) {
                *r = q - c;
            }
            let table = self.pq.lookup_table(&residual);
            // Four candidates at a time: each keeps its own (unchanged)
            // subspace summation order, but the four dependent add chains
            // interleave, hiding the table-lookup latency that otherwise
            // dominates list scans. The `dist <= thr` filter skips the
            // heap for candidates that cannot be kept; equality still goes
            // through so `push` can break distance ties by id, making the
            // results identical to pushing every candidate.
            let n = list.ids.len();
            let mut thr = top.threshold();
            let mut pos = 0;
            while pos + 4 <= n {
                let d0 = self.pq.adc_distance(&table, &list.codes[pos * m..(pos + 1) * m]);
                let d1 = self.pq.adc_distance(&table, &list.codes[(pos + 1) * m..(pos + 2) * m]);
                let d2 = self.pq.adc_distance(&table, &list.codes[(pos + 2) * m..(pos + 3) * m]);
                let d3 = self.pq.adc_distance(&table, &list.codes[(pos + 3) * m..(pos + 4) * m]);
                if d0 <= thr {
                    top.push(DistId { dist: d0, id: list.ids[pos] });
                    thr = top.threshold();
                }
                if d1 <= thr {
                    top.push(DistId { dist: d1, id: list.ids[pos + 1] });
                    thr = top.threshold();
                }
                if d2 <= thr {
                    top.push(DistId { dist: d2, id: list.ids[pos + 2] });
                    thr = top.threshold();
                }
                if d3 <= thr {
                    top.push(DistId { dist: d3, id: list.ids[pos + 3] });
                    thr = top.threshold();
                }
                pos += 4;
            }
            for p in pos..n {
                let dist = self.pq.adc_distance(&table, &list.codes[p * m..(p + 1) * m]);
                if dist <= thr {
                    top.push(DistId { dist, id: list.ids[p] });
                    thr = top.threshold();
                }
            }
        }
        let neighbors = top
            .into_sorted()
            .into_iter()
            .map(|d| Neighbor { id: d.id, value: self.value(d.id), dist: d.dist })
            .collect();
        NeighborSet { neighbors }
    }
}

/// [`NeighborSearch`] adapter fixing `nprobe`, optionally re-ranking the
/// quantized candidates by exact distance against the original keys.
#[derive(Clone, Copy)]
pub struct IvfSearcher<'a> {
    index: &'a IvfPqIndex,
    nprobe: usize,
    rescore_keys: Option<&'a Matrix>,
}

impl<'a> IvfSearcher<'a> {
    pub fn new(index: &'a IvfPqIndex, nprobe: usize) -> Self {
        IvfSearcher { index, nprobe, rescore_keys: None }
    }

    /// Re-rank each result set by exact squared distance to these keys
    /// (the matrix the index was built from).
    pub fn with_rescore(index: &'a IvfPqIndex, nprobe: usize, keys: &'a Matrix) -> Self {
        assert_eq!(keys.rows(), index.len(), "rescore keys do not match index size");
        IvfSearcher { index, nprobe, rescore_keys: Some(keys) }
    }
}

impl NeighborSearch for IvfSearcher<'_> {
    fn search(&self, query: &[f32], k: usize) -> NeighborSet {
        let mut set = self.index.search(query, k, self.nprobe);
        if let Some(keys) = self.rescore_keys {
            for n in set.neighbors.iter_mut() {
                n.dist = squared_l2(query, keys.row(n.id as usize));
            }
            set.neighbors.sort_unstable_by(|a, b| {
                a.dist.total_cmp(&b.dist).then(a.id.cmp(&b.id))
            });
        }
        set
    }
}
