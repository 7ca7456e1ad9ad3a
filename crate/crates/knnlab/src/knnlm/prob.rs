//! Neighbor-distribution and interpolation arithmetic.

use crate::vindex::NeighborSet;

/// Sparse distribution over the token values present in a neighbor set.
/// Entries are sorted by token id; tokens not listed have probability 0.
/// An empty distribution means "no neighbors retrieved" and callers fall
/// back to the base model alone.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseProb {
    entries: Vec<(u32, f64)>,
}

impl SparseProb {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, token: u32) -> f64 {
        match self.entries.binary_search_by_key(&token, |e| e.0) {
            Ok(i) => self.entries[i].1,
            Err(_) => 0.0,
        }
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = (u32, f64)> + '_ {
        self.entries.iter().copied()
    }

    pub fn sum(&self) -> f64 {
        self.entries.iter().map(|e| e.1).sum()
    }
}

/// Distance-softmax distribution over neighbor values:
///
/// ```text
/// weight(entry) = exp(-(dist - min_dist) / tau)
/// p(v) = sum of weights with value v / sum of all weights
/// ```
///
/// Subtracting the minimum distance before exponentiation is an exact
/// rescaling of the softmax and keeps the largest weight at 1, so the
/// result never underflows to an all-zero distribution. An entry's
/// individual weight can still underflow to 0 once `(dist - min_dist) /
/// tau` exceeds ~745; at the squared distances unit-norm context keys
/// produce (≤ 4) this requires tau below ~5e-3.
///
/// An empty neighbor set yields the empty distribution.
pub fn knn_prob(neighbors: &NeighborSet, tau: f64) -> SparseProb {
    assert!(tau > 0.0, "temperature must be positive");
    if neighbors.is_empty() {
        return SparseProb::default();
    }
    let min_dist =
        neighbors.neighbors.iter().map(|n| n.dist).fold(f32::INFINITY, f32::min) as f64;
    // Accumulate per-value weights in (value, then retrieval-rank) order so
    // every summation order is fixed.
    let mut weighted: Vec<(u32, f64)> = neighbors
        .neighbors
        .iter()
        .map(|n| (n.value, (-(n.dist as f64 - min_dist) / tau).exp()))
        .collect();
    weighted.sort_by_key(|&(v, _)| v);
    let mut entries: Vec<(u32, f64)> = Vec::new();
    for (v, w) in weighted {
        match entries.last_mut() {
            Some(last) if last.0 == v => last.1 += w,
            _ => entries.push((v, w)),
        }
    }
    let total: f64 = entries.iter().map(|e| e.1).sum();
    for e in entries.iter_mut() {
        e.1 /= total;
    }
    SparseProb { entries }
}

/// Pointwise interpolation for one token. Written as
/// `p_lm + lambda * (p_knn - p_lm)` — algebraically identical to
/// `lambda * p_knn + (1 - lambda) * p_lm` but with the property that for
/// lambda in (0, 1) the sign of `p - p_lm` is exactly the sign of
/// `p_knn - p_lm` in floating point as well (a single rounded product
/// cannot flip a sign), so the interpolated model beats the base model on
/// a token if and only if the neighbor distribution does.
pub fn interpolate_point(p_knn: f64, p_lm: f64, lambda: f64) -> f64 {
    p_lm + lambda * (p_knn - p_lm)
}

/// Dense interpolation over the vocabulary. `lambda` 0 and 1 return exact
/// copies of the respective inputs; an empty neighbor distribution returns
/// the base distribution unchanged regardless of `lambda`.
pub fn interpolate(p_knn: &SparseProb, p_lm: &[f64], lambda: f64) -> Vec<f64> {
    if p_knn.is_empty() || lambda == 0.0 {
        return p_lm.to_vec();
    }
    if lambda == 1.0 {
        let mut out = vec![0.0f64; p_lm.len()];
        for (t, p) in p_knn.iter() {
            out[t as usize] = p;
        }
        return out;
    }
    let mut out: Vec<f64> = p_lm.iter().map(|&q| q + lambda * (0.0 - q)).collect();
    for (t, p) in p_knn.iter() {
        let q = p_lm[t as usize];
        out[t as usize] = q + lambda * (p - q);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::SplitMix64;
    use crate::vindex::Neighbor;

    fn set(entries: &[(u32, f32)]) -> NeighborSet {
        NeighborSet {
            neighbors: entries
                .iter()
                .enumerate()
                .map(|(i, &(value, dist))| Neighbor { id: i as u32, value, dist })
                .collect(),
        }
    }

    #[test]
    fn single_neighbor_gets_everything() {
        for dist in [0.0f32, 1.0, 123.0] {
            let p = knn_prob(&set(&[(7, dist)]), 10.0);
            assert_eq!(p.get(7), 1.0);
            assert_eq!(p.get(8), 0.0);
        }
    }

    #[test]
    fn two_neighbors_at_log_odds_spacing() {
        // Distances 0 and tau*ln(3) put 3:1 odds on the closer value.
        let tau = 2.0f64;
        let p = knn_prob(&set(&[(1, 0.0), (2, (tau * 3.0f64.ln()) as f32)]), tau);
        assert!((p.get(1) - 0.75).abs() < 1e-6, "{}", p.get(1));
        assert!((p.get(2) - 0.25).abs() < 1e-6, "{}", p.get(2));
    }

    #[test]
    fn infinite_temperature_gives_relative_counts() {
        let p = knn_prob(&set(&[(5, 0.1), (5, 0.9), (6, 2.5), (7, 3.9)]), 1e9);
        assert!((p.get(5) - 0.5).abs() < 1e-6);
        assert!((p.get(6) - 0.25).abs() < 1e-6);
        assert!((p.get(7) - 0.25).abs() < 1e-6);
    }

    #[test]
    fn normalizes_over_random_sets() {
        let mut rng = SplitMix64::new(4);
        for _ in 0..500 {
            let n = 1 + rng.next_below(64) as usize;
            let entries: Vec<(u32, f32)> = (0..n)
                .map(|_| (rng.next_below(30) as u32, (rng.next_f64() * 8.0) as f32))
                .collect();
            let tau = [0.1, 1.0, 10.0, 1e9][rng.next_below(4) as usize];
            let p = knn_prob(&set(&entries), tau);
            assert!((p.sum() - 1.0).abs() < 1e-9);
            assert!(p.iter().all(|(_, q)| q > 0.0));
        }
    }

    #[test]
    fn temperature_smooths_toward_even_odds() {
        let entries = [(1u32, 0.0f32), (2, 2.0)];
        let mut prev = 1.0f64;
        for tau in [0.5, 1.0, 2.0, 8.0, 64.0] {
            let p = knn_prob(&set(&entries), tau);
            let gap = (p.get(1) - 0.5).abs();
            assert!(gap < prev, "gap {gap} did not shrink at tau {tau}");
            prev = gap;
        }
    }

    #[test]
    fn joint_distance_temperature_scaling_is_invariant() {
        // Distances live in f32, so the scale factors must be chosen such
        // that scaling is itself lossless: powers of two for arbitrary
        // distances, small odd integers for integer-valued distances.
        // Otherwise the multiplication perturbs the inputs before the
        // invariance property can apply.
        let mut rng = SplitMix64::new(12);
        for round in 0..100 {
            let integer_dists = round % 2 == 0;
            let entries: Vec<(u32, f32)> = (0..16)
                .map(|_| {
                    let d = if integer_dists {
                        rng.next_below(64) as f32
                    } else {
                        (rng.next_f64() * 4.0) as f32
                    };
                    (rng.next_below(6) as u32, d)
                })
                .collect();
            let tau = 0.5 + rng.next_f64() * 5.0;
            let base = knn_prob(&set(&entries), tau);
            let factors: &[f64] =
                if integer_dists { &[3.0, 7.0, 129.0] } else { &[0.25, 1024.0, 0.0009765625] };
            for &c in factors {
                let scaled_entries: Vec<(u32, f32)> =
                    entries.iter().map(|&(v, d)| (v, (d as f64 * c) as f32)).collect();
                for (i, (&(_, s), &(_, d))) in
                    scaled_entries.iter().zip(entries.iter()).enumerate()
                {
                    assert_eq!(s as f64, d as f64 * c, "scaling must be exact (entry {i})");
                }
                let scaled = knn_prob(&set(&scaled_entries), tau * c);
                for (t, q) in base.iter() {
                    assert!(
                        (scaled.get(t) - q).abs() < 1e-9,
                        "c={c} token {t}: {} vs {q}",
                        scaled.get(t)
                    );
                }
            }
        }
    }

    #[test]
    fn empty_set_yields_empty_distribution() {
        let p = knn_prob(&NeighborSet::default(), 1.0);
        assert!(p.is_empty());
        assert_eq!(p.get(0), 0.0);
    }

    #[test]
    fn interpolation_endpoints_are_exact() {
        let p_lm = vec![0.1, 0.2, 0.3, 0.4];
        let p_knn = knn_prob(&set(&[(2, 0.0), (0, 1.0)]), 1.0);
        assert_eq!(interpolate(&p_knn, &p_lm, 0.0), p_lm);
        let pure = interpolate(&p_knn, &p_lm, 1.0);
        assert_eq!(pure[1], 0.0);
        assert_eq!(pure[3], 0.0);
        assert_eq!(pure[0], p_knn.get(0));
        assert_eq!(pure[2], p_knn.get(2));
        // Empty neighbors: base distribution at any lambda.
        assert_eq!(interpolate(&SparseProb::default(), &p_lm, 0.7), p_lm);
    }

    #[test]
    fn interpolation_hand_value() {
        let p = interpolate_point(0.137, 0.518, 0.25);
        assert!((p - 0.42275).abs() < 1e-12, "{p}");
    }

    #[test]
    fn interpolated_distribution_sums_to_one() {
        let mut rng = SplitMix64::new(3);
        for _ in 0..100 {
            // Random dense base distribution.
            let mut p_lm: Vec<f64> = (0..20).map(|_| rng.next_f64() + 1e-3).collect();
            let z: f64 = p_lm.iter().sum();
            for q in p_lm.iter_mut() {
                *q /= z;
            }
            let entries: Vec<(u32, f32)> =
                (0..8).map(|_| (rng.next_below(20) as u32, (rng.next_f64() * 3.0) as f32)).collect();
            let p_knn = knn_prob(&set(&entries), 2.0);
            let lambda = rng.next_f64();
            let p = interpolate(&p_knn, &p_lm, lambda);
            let sum: f64 = p.iter().sum();
            assert!((sum - 1.0).abs() < 1e-9, "lambda {lambda}: sum {sum}");
            assert!(p.iter().all(|&q| q >= 0.0));
        }
    }

    #[test]
    fn gain_sign_matches_neighbor_advantage_on_a_grid() {
        // Mini version of the exhaustive dominance check.
        for i in 0..=20 {
            for j in 0..=20 {
                let p_knn = i as f64 * 0.05;
                let p_lm = j as f64 * 0.05;
                for l in 1..20 {
                    let lambda = l as f64 * 0.05;
                    let p = interpolate_point(p_knn, p_lm, lambda);
                    assert_eq!(p > p_lm, p_knn > p_lm, "({p_knn}, {p_lm}, {lambda})");
                    assert_eq!(p < p_lm, p_knn < p_lm, "({p_knn}, {p_lm}, {lambda})");
                }
            }
        }
    }
}
