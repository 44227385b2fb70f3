//! The restricted graph family on which two-reachability needs large
//! decision trees.
//!
//! Only the edges `(0, n-1)`, `(0, v)` and `(v, n-1)` may be present. Bit 0
//! of a family member is `(0, n-1)`; middle vertex `v` owns bits
//! `2(v-1)+1` for `(0, v)` and `2(v-1)+2` for `(v, n-1)`.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::boolean_dt::{min_tree_leaves, DecisionTree, PartialFunction, MAX_MIN_TREE_VARS};
use crate::error::{Error, Result};
use crate::local_iter::{
    build_two_reachability_model, two_reachability_truth, GraphInstance, InputEncoding,
    TWO_REACHABILITY_INIT,
};

/// Largest family enumerated, in bits.
pub const MAX_FAMILY_BITS: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RestrictedInstance {
    pub n: usize,
    pub bits: u32,
}

pub fn family_bits(n: usize) -> usize {
    2 * n.saturating_sub(2) + 1
}

impl RestrictedInstance {
    pub fn bit(&self, j: usize) -> bool {
        (self.bits >> j) & 1 == 1
    }

    /// Full graph instance with `Init` the indicator of vertex 0.
    pub fn to_graph(&self) -> GraphInstance {
        let enc = InputEncoding::new(self.n).expect("family sizes are valid encodings");
        let last = self.n - 1;
        let mut adj = 0u128;
        let mut put = |u: usize, v: usize, on: bool| {
            if on {
                adj |= 1 << enc.edge_index(u, v);
            }
        };
        put(0, last, self.bit(0));
        for v in 1..last {
            put(0, v, self.bit(2 * (v - 1) + 1));
            put(v, last, self.bit(2 * (v - 1) + 2));
        }
        GraphInstance::new(self.n, TWO_REACHABILITY_INIT, adj).expect("edges fit the encoding")
    }
}

fn check(n: usize, cap: usize) -> Result<()> {
    if n < 3 {
        return Err(Error::Invalid(format!(
            "the restricted family needs n >= 3, got {n}"
        )));
    }
    if family_bits(n) > cap {
        return Err(Error::Resource(format!(
            "{} family bits exceed the cap of {cap}",
            family_bits(n)
        )));
    }
    Ok(())
}

/// All `2^(2(n-2)+1)` members, in bit order.
pub fn enumerate_restricted_family(n: usize) -> Result<impl Iterator<Item = RestrictedInstance>> {
    check(n, MAX_FAMILY_BITS)?;
    Ok((0..1u32 << family_bits(n)).map(move |bits| RestrictedInstance { n, bits }))
}

/// Distance at most 2 between vertex 0 and vertex n-1, by breadth-first
/// search over the full adjacency.
pub fn bfs_within_two(g: &GraphInstance) -> bool {
    let n = g.n;
    let enc = InputEncoding::new(n).expect("instance sizes are valid encodings");
    let mut dist = vec![usize::MAX; n];
    let mut queue = VecDeque::from([0usize]);
    dist[0] = 0;
    while let Some(u) = queue.pop_front() {
        for v in 0..n {
            if v != u && dist[v] == usize::MAX && g.has_edge(&enc, u, v) {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    dist[n - 1] <= 2
}

/// `(negatives, total)`: members with no path of length at most 2.
pub fn count_negatives(n: usize) -> Result<(u64, u64)> {
    let mut neg = 0u64;
    let mut total = 0u64;
    for inst in enumerate_restricted_family(n)? {
        total += 1;
        if !two_reachability_truth(&inst.to_graph())? {
            neg += 1;
        }
    }
    Ok((neg, total))
}

/// `⌈(3/2)^(n-2)⌉`.
pub fn leaf_lower_bound(n: usize) -> usize {
    // exact integer ceiling of 3^k / 2^k
    let k = n.saturating_sub(2) as u32;
    let (num, den) = (3u128.pow(k), 2u128.pow(k));
    num.div_ceil(den) as usize
}

/// Minimum leaves of a tree over the family bits computing two-reachability.
pub fn min_leaves_restricted(n: usize) -> Result<(usize, DecisionTree)> {
    check(n, MAX_MIN_TREE_VARS)?;
    let d = family_bits(n);
    let f = PartialFunction::total(d, |x| {
        two_reachability_truth(&RestrictedInstance { n, bits: x }.to_graph()).expect("n >= 3")
    })?;
    min_tree_leaves(&f)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparationRow {
    pub n: usize,
    pub total: u64,
    pub negatives: u64,
    /// `None` past the minimal-tree search cap.
    pub min_leaves: Option<usize>,
    pub lower_bound: usize,
    /// Fraction of the family where the iterated model matches BFS.
    pub dp_agreement: f64,
    /// `min_leaves(n) / min_leaves(n-1)` when both are known.
    pub growth: Option<f64>,
}

pub fn separation_report(ns: impl IntoIterator<Item = usize>) -> Result<Vec<SeparationRow>> {
    let mut rows: Vec<SeparationRow> = Vec::new();
    for n in ns {
        let model = build_two_reachability_model(n)?;
        let (mut total, mut negatives, mut agree) = (0u64, 0u64, 0u64);
        for inst in enumerate_restricted_family(n)? {
            let g = inst.to_graph();
            let truth = bfs_within_two(&g);
            total += 1;
            negatives += !truth as u64;
            agree += (model.output(&g) == truth) as u64;
        }
        let min_leaves = if family_bits(n) <= MAX_MIN_TREE_VARS {
            Some(min_leaves_restricted(n)?.0)
        } else {
            None
        };
        let growth = match (rows.last(), min_leaves) {
            (Some(prev), Some(m)) if prev.n + 1 == n => {
                prev.min_leaves.map(|p| m as f64 / p as f64)
            }
            _ => None,
        };
        rows.push(SeparationRow {
            n,
            total,
            negatives,
            min_leaves,
            lower_bound: leaf_lower_bound(n),
            dp_agreement: agree as f64 / total as f64,
            growth,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn family_sizes() {
        assert_eq!(enumerate_restricted_family(3).unwrap().count(), 8);
        assert_eq!(enumerate_restricted_family(4).unwrap().count(), 32);
        assert_eq!(enumerate_restricted_family(6).unwrap().count(), 512);
        assert!(enumerate_restricted_family(2).is_err());
        assert!(matches!(
            enumerate_restricted_family(12),
            Err(Error::Resource(_))
        ));
    }

    #[test]
    fn lower_bounds() {
        assert_eq!(leaf_lower_bound(3), 2);
        assert_eq!(leaf_lower_bound(4), 3);
        assert_eq!(leaf_lower_bound(6), 6);
    }

    #[test]
    fn members_are_distinct_graphs_without_other_edges() {
        let enc = InputEncoding::new(5).unwrap();
        let mut seen = std::collections::HashSet::new();
        for inst in enumerate_restricted_family(5).unwrap() {
            let g = inst.to_graph();
            assert!(seen.insert(g.adj));
            for u in 1..4 {
                for v in u + 1..4 {
                    assert!(!g.has_edge(&enc, u, v));
                }
            }
        }
    }
}
