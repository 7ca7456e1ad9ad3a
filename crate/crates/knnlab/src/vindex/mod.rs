//! Vector index layer: exact nearest-neighbor search over f32 keys plus an
//! inverted-file product-quantization (IVF-PQ) approximate index.
//!
//! All distances are squared Euclidean unless a function says otherwise.
//! Every search breaks distance ties by lower entry id, so results are
//! fully deterministic for a given key set.

mod flat;
mod io;
mod ivfpq;
mod kmeans;
mod pq;

pub use flat::FlatIndex;
pub use io::{read_index_file, write_index_file, INDEX_MAGIC};
pub use ivfpq::{IvfList, IvfPqConfig, IvfPqIndex, IvfSearcher};
pub use kmeans::{kmeans, KmeansConfig, KmeansResult};
pub use pq::{train_pq, PqCodebook};

/// One retrieved datastore entry.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Neighbor {
    /// Datastore entry id (position in the key array).
    pub id: u32,
    /// The token that followed this entry's context in training.
    pub value: u32,
    /// Squared L2 distance from the query (exact or ADC-approximated,
    /// depending on the searcher).
    pub dist: f32,
}

/// Search result: neighbors sorted ascending by `(dist, id)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NeighborSet {
    pub neighbors: Vec<Neighbor>,
}

impl NeighborSet {
    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }

    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn ids(&self) -> impl Iterator<Item = u32> + '_ {
        self.neighbors.iter().map(|n| n.id)
    }

    /// Keep only the first `k` neighbors.
    pub fn truncated(&self, k: usize) -> NeighborSet {
        NeighborSet { neighbors: self.neighbors[..k.min(self.neighbors.len())].to_vec() }
    }
}

/// Anything that can answer k-nearest-neighbor queries over a datastore.
pub trait NeighborSearch {
    /// Return up to `k` nearest entries, sorted ascending by `(dist, id)`.
    /// Fewer than `k` may be returned if the index holds fewer entries (or,
    /// for inverted-file searches, if the probed lists hold fewer).
    fn search(&self, query: &[f32], k: usize) -> NeighborSet;
}

/// Distance/id pair ordered lexicographically; used for tie-stable top-k
/// selection everywhere in this module.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct DistId {
    pub dist: f32,
    pub id: u32,
}

impl Eq for DistId {}

impl Ord for DistId {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.dist.total_cmp(&other.dist).then(self.id.cmp(&other.id))
    }
}

impl PartialOrd for DistId {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Bounded max-heap that keeps the `k` smallest `(dist, id)` pairs seen.
pub(crate) struct TopK {
    k: usize,
    heap: std::collections::BinaryHeap<DistId>,
}

impl TopK {
    pub fn new(k: usize) -> Self {
        TopK { k, heap: std::collections::BinaryHeap::with_capacity(k + 1) }
    }

    pub fn push(&mut self, item: DistId) {
        if self.k == 0 {
            return;
        }
        if self.heap.len() < self.k {
            self.heap.push(item);
        } else if item < *self.heap.peek().expect("non-empty") {
            self.heap.push(item);
            self.heap.pop();
        }
    }

    /// Acceptance bound for pre-filtering candidates: while the heap has
    /// room every finite distance passes (`+inf`; `-inf` when k is 0 and
    /// nothing can ever be kept). Once full, only a candidate with
    /// `dist <= threshold()` can displace anything — equality must pass the
    /// filter so `push` can still break distance ties by id.
    pub fn threshold(&self) -> f32 {
        if self.k == 0 {
            f32::NEG_INFINITY
        } else if self.heap.len() < self.k {
            f32::INFINITY
        } else {
            self.heap.peek().expect("non-empty").dist
        }
    }

    /// Drain into ascending `(dist, id)` order.
    pub fn into_sorted(self) -> Vec<DistId> {
        let mut v = self.heap.into_vec();
        v.sort_unstable();
        v
    }
}
