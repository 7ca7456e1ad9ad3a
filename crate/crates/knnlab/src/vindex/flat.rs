//! Exhaustive exact nearest-neighbor search.

use super::{DistId, Neighbor, NeighborSearch, NeighborSet, TopK};
use crate::util::{squared_l2, squared_l2_bounded, Matrix};

/// Zero-copy exact searcher over borrowed keys and values.
#[derive(Clone, Copy, Debug)]
pub struct FlatIndex<'a> {
    keys: &'a Matrix,
    values: &'a [u32],
}

impl<'a> FlatIndex<'a> {
    /// Panics if `keys` and `values` disagree on length; that always
    /// indicates a datastore construction bug, not bad user input.
    pub fn new(keys: &'a Matrix, values: &'a [u32]) -> Self {
        assert_eq!(keys.rows(), values.len(), "keys/values length mismatch");
        FlatIndex { keys, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.keys.dim()
    }

    pub fn keys(&self) -> &'a Matrix {
        self.keys
    }

    pub fn values(&self) -> &'a [u32] {
        self.values
    }

    /// Exact nearest neighbor among entries whose id differs from
    /// `exclude_id`, or None if no such entry exists. Used for
    /// leave-one-out datastore diagnostics.
    pub fn nearest_excluding(&self, query: &[f32], exclude_id: u32) -> Option<Neighbor> {
        let mut best: Option<DistId> = None;
        for id in 0..self.len() as u32 {
            if id == exclude_id {
                continue;
            }
            let cand = DistId { dist: squared_l2(query, self.keys.row(id as usize)), id };
            if best.map_or(true, |b| cand < b) {
                best = Some(cand);
            }
        }
        best.map(|d| Neighbor { id: d.id, value: self.values[d.id as usize], dist: d.dist })
    }

    /// Leave-one-out nearest neighbors for a batch of stored entries,
    /// computed in one pass over the key array.
    ///
    /// Result `i` equals `nearest_excluding(keys.row(entry_ids[i]),
    /// entry_ids[i])` bit for bit. Batching amortizes the sweep over the
    /// key array, and each candidate row is abandoned at the first
    /// checkpoint where its partial distance reaches the entry's current
    /// best: a partial never overstates the full distance, and a
    /// candidate whose distance ties the incumbent loses anyway because
    /// this forward scan means the incumbent has the lower id — so
    /// pruning cannot change any winner.
    pub fn self_nearest_batch(&self, entry_ids: &[u32]) -> Vec<Option<Neighbor>> {
        let queries: Vec<&[f32]> = entry_ids.iter().map(|&e| self.keys.row(e as usize)).collect();
        let mut best: Vec<Option<DistId>> = vec![None; entry_ids.len()];
        for id in 0..self.len() as u32 {
            let row = self.keys.row(id as usize);
            for ((slot, &e), query) in best.iter_mut().zip(entry_ids).zip(&queries) {
                if id == e {
                    continue;
                }
                let bound = slot.map_or(f32::INFINITY, |b| b.dist);
                let cand = DistId { dist: squared_l2_bounded(query, row, bound), id };
                if slot.map_or(true, |b| cand < b) {
                    *slot = Some(cand);
                }
            }
        }
        best.into_iter()
            .map(|b| {
                b.map(|d| Neighbor { id: d.id, value: self.values[d.id as usize], dist: d.dist })
            })
            .collect()
    }
}

impl NeighborSearch for FlatIndex<'_> {
    fn search(&self, query: &[f32], k: usize) -> NeighborSet {
        let mut top = TopK::new(k);
        for id in 0..self.len() as u32 {
            top.push(DistId { dist: squared_l2(query, self.keys.row(id as usize)), id });
        }
        let neighbors = top
            .into_sorted()
            .into_iter()
            .map(|d| Neighbor { id: d.id, value: self.values[d.id as usize], dist: d.dist })
            .collect();
        NeighborSet { neighbors }
    }
}
