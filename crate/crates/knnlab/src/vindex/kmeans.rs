//! Lloyd's k-means with k-means++ seeding.
//!
//! Deterministic for a given seed: the assignment pass runs in parallel
//! over fixed-size chunks whose partial results are merged sequentially in
//! chunk order, centroid means accumulate in f64, and all ties (nearest
//! centroid, farthest point) break toward the lower index.

use rayon::prelude::*;

use super::DistId;
use crate::error::{Error, Result};
use crate::util::{squared_l2, Matrix, SplitMix64};

const CHUNK_ROWS: usize = 4096;

#[derive(Clone, Debug)]
pub struct KmeansConfig {
    /// Number of clusters.
    pub k: usize,
    /// Maximum Lloyd iterations.
    pub max_iters: usize,
    /// Stop when relative distortion improvement falls below this.
    pub epsilon: f64,
    pub seed: u64,
}

impl KmeansConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        KmeansConfig { k, max_iters: 25, epsilon: 1e-6, seed }
    }
}

#[derive(Clone, Debug)]
pub struct KmeansResult {
    /// k × dim centroid matrix.
    pub centroids: Matrix,
    /// Nearest-centroid index per input row, consistent with `centroids`.
    pub assignments: Vec<u32>,
    /// Mean squared distance to the assigned centroid, per assignment pass.
    pub distortion_trace: Vec<f64>,
}

impl KmeansResult {
    pub fn distortion(&self) -> f64 {
        *self.distortion_trace.last().expect("at least one pass")
    }
}

struct ChunkPartial {
    assignments: Vec<u32>,
    dists: Vec<f32>,
    sums: Vec<f64>,
    counts: Vec<u64>,
    distortion: f64,
}

/// One parallel assignment pass. Returns per-point assignments and
/// distances, per-cluster f64 sums and counts, and the total distortion.
fn assign(data: &Matrix, centroids: &Matrix) -> (Vec<u32>, Vec<f32>, Vec<f64>, Vec<u64>, f64) {
    let dim = data.dim();
    let k = centroids.rows();
    let partials: Vec<ChunkPartial> = data
        .data()
        .par_chunks(CHUNK_ROWS * dim)
        .map(|chunk| {
            let rows = chunk.len() / dim;
            let mut part = ChunkPartial {
                assignments: Vec::with_capacity(rows),
                dists: Vec::with_capacity(rows),
                sums: vec![0.0; k * dim],
                counts: vec![0; k],
                distortion: 0.0,
            };
            for row in chunk.chunks_exact(dim) {
                let mut best = DistId { dist: f32::INFINITY, id: 0 };
                for (c, centroid) in centroids.iter_rows().enumerate() {
                    let cand = DistId { dist: squared_l2(row, centroid), id: c as u32 };
                    if cand < best {
                        best = cand;
                    }
                }
                let a = best.id as usize;
                part.assignments.push(best.id);
                part.dists.push(best.dist);
                part.distortion += best.dist as f64;
                part.counts[a] += 1;
                for (s, x) in part.sums[a * dim..(a + 1) * dim].iter_mut().zip(row) {
                    *s += *x as f64;
                }
            }
            part
        })
        .collect();

    let n = data.rows();
    let mut assignments = Vec::with_capacity(n);
    let mut dists = Vec::with_capacity(n);
    let mut sums = vec![0.0f64; k * dim];
    let mut counts = vec![0u64; k];
    let mut distortion = 0.0f64;
    for part in partials {
        assignments.extend_from_slice(&part.assignments);
        dists.extend_from_slice(&part.dists);
        for (s, p) in sums.iter_mut().zip(&part.sums) {
            *s += *p;
        }
        for (c, p) in counts.iter_mut().zip(&part.counts) {
            *c += *p;
        }
        distortion += part.distortion;
    }
    (assignments, dists, sums, counts, distortion)
}

/// k-means++ seeding: the first centroid is uniform, each later one is
/// drawn with probability proportional to its squared distance from the
/// nearest already-chosen centroid.
fn seed_centroids(data: &Matrix, k: usize, rng: &mut SplitMix64) -> Matrix {
    let n = data.rows();
    let mut centroids = Matrix::new(data.dim());
    let first = rng.next_below(n as u64) as usize;
    centroids.push_row(data.row(first));
    let mut d2: Vec<f64> = data
        .iter_rows()
        .map(|row| squared_l2(row, centroids.row(0)) as f64)
        .collect();
    while centroids.rows() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let r = rng.next_f64() * total;
            let mut cum = 0.0;
            let mut chosen = None;
            for (i, &w) in d2.iter().enumerate() {
                cum += w;
                if w > 0.0 && r < cum {
                    chosen = Some(i);
                    break;
                }
            }
            // Floating-point edge: r landed at or beyond the last positive
            // mass. Take the last point with positive weight.
            chosen.unwrap_or_else(|| {
                d2.iter().rposition(|&w| w > 0.0).expect("total > 0 implies a positive weight")
            })
        } else {
            // Fewer distinct points than clusters: any point will do; the
            // duplicate centroid ends up empty and is handled by reseeding.
            rng.next_below(n as u64) as usize
        };
        centroids.push_row(data.row(pick));
        let new_row = centroids.row(centroids.rows() - 1);
        for (w, row) in d2.iter_mut().zip(data.iter_rows()) {
            let d = squared_l2(row, new_row) as f64;
            if d < *w {
                *w = d;
            }
        }
    }
    centroids
}

/// Run k-means clustering. Errors if `k` is zero or exceeds the number of
/// rows, or if the data is empty.
pub fn kmeans(data: &Matrix, config: &KmeansConfig) -> Result<KmeansResult> {
    let n = data.rows();
    if config.k == 0 {
        return Err(Error::InvalidInput("k-means needs at least one cluster".into()));
    }
    if n < config.k {
        return Err(Error::InvalidInput(format!(
            "k-means with k={} needs at least that many points, got {n}",
            config.k
        )));
    }
    if config.max_iters == 0 {
        return Err(Error::InvalidInput("k-means needs at least one iteration".into()));
    }
    let dim = data.dim();
    let mut rng = SplitMix64::new(config.seed);
    let mut centroids = seed_centroids(data, config.k, &mut rng);
    let mut trace = Vec::new();
    let mut assignments = Vec::new();
    for iter in 0..config.max_iters {
        let (assign_pass, dists, sums, counts, total) = assign(data, &centroids);
        assignments = assign_pass;
        let distortion = total / n as f64;
        trace.push(distortion);
        let converged = distortion == 0.0
            || trace
                .len()
                .checked_sub(2)
                .map(|i| trace[i] - distortion <= config.epsilon * trace[i])
                .unwrap_or(false);
        if converged || iter + 1 == config.max_iters {
            break;
        }
        // Update step: means of assigned points; empty clusters jump to the
        // farthest currently-assigned point (ties to the lower point id).
        let mut dists = dists;
        for c in 0..config.k {
            if counts[c] == 0 {
                let far = dists
                    .iter()
                    .enumerate()
                    .max_by(|(i, a), (j, b)| a.total_cmp(b).then(j.cmp(i)))
                    .map(|(i, _)| i)
                    .expect("data is non-empty");
                centroids.row_mut(c).copy_from_slice(data.row(far));
                dists[far] = -1.0;
            } else {
                let inv = 1.0 / counts[c] as f64;
                for (out, s) in centroids.row_mut(c).iter_mut().zip(&sums[c * dim..(c + 1) * dim])
                {
                    *out = (s * inv) as f32;
                }
            }
        }
    }
    Ok(KmeansResult { centroids, assignments, distortion_trace: trace })
}
