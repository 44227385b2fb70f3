//! 2-reachability between the first and last vertex.

use crate::boolean_dt::DecisionTree;
use crate::error::{Error, Result};

use super::encoding::{GraphInstance, InputEncoding};
use super::model::LocalIterationModel;

/// Whether vertices `0` and `n - 1` are adjacent or share a neighbour.
pub fn two_reachability_truth(inst: &GraphInstance) -> Result<bool> {
    let n = inst.n;
    if n < 2 {
        return Err(Error::Invalid(format!(
            "2-reachability needs n >= 2, got {n}"
        )));
    }
    let enc = InputEncoding::new(n)?;
    let last = n - 1;
    Ok(inst.has_edge(&enc, 0, last)
        || (1..last).any(|v| inst.has_edge(&enc, 0, v) && inst.has_edge(&enc, v, last)))
}

/// `Init` the reachability model expects: only vertex 0 is marked.
pub const TWO_REACHABILITY_INIT: u64 = 1;

/// Two-round model deciding 2-reachability from the indicator of vertex 0.
///
/// Round 1 marks each middle vertex `v` with `e(0,v) AND e(v,n-1)` (given
/// that vertex 0 is marked). Round 2 has the last vertex check the direct
/// edge and then each middle mark in a chain. The literal rule
/// `h_v OR_u (e(u,v) AND h_u)` has no linear-size tree, because a disjunction
/// of disjoint pairs forces the tree to copy the remainder under both branches
/// of every pair; splitting the pairs across rounds avoids that.
pub fn build_two_reachability_model(n: usize) -> Result<LocalIterationModel> {
    if n < 2 {
        return Err(Error::Invalid(format!(
            "2-reachability needs n >= 2, got {n}"
        )));
    }
    let enc = InputEncoding::new(n)?;
    let last = n - 1;
    let (f, t) = (DecisionTree::leaf(false), DecisionTree::leaf(true));
    let mut trees = vec![DecisionTree::split(enc.dp_var(0), f.clone(), t.clone())];
    for v in 1..last {
        let both = DecisionTree::split(enc.edge_var(v, last), f.clone(), t.clone());
        let via = DecisionTree::split(enc.edge_var(0, v), f.clone(), both);
        trees.push(DecisionTree::split(enc.dp_var(0), f.clone(), via));
    }
    let chain = (1..last).rev().fold(f.clone(), |rest, v| {
        DecisionTree::split(enc.dp_var(v), rest, t.clone())
    });
    trees.push(DecisionTree::split(enc.edge_var(0, last), chain, t));
    LocalIterationModel::new(n, 2, trees)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::local_iter::model::run_local_iteration;
    use std::collections::VecDeque;

    fn bfs_within_two(inst: &GraphInstance) -> bool {
        let n = inst.n;
        let enc = InputEncoding::new(n).unwrap();
        let mut dist = vec![usize::MAX; n];
        dist[0] = 0;
        let mut q = VecDeque::from([0]);
        while let Some(u) = q.pop_front() {
            for v in 0..n {
                if dist[v] == usize::MAX && inst.has_edge(&enc, u, v) {
                    dist[v] = dist[u] + 1;
                    q.push_back(v);
                }
            }
        }
        dist[n - 1] <= 2
    }

    fn graph(n: usize, edges: &[(usize, usize)]) -> GraphInstance {
        let enc = InputEncoding::new(n).unwrap();
        let adj = edges
            .iter()
            .fold(0u128, |a, &(u, v)| a | 1 << enc.edge_index(u, v));
        GraphInstance::new(n, TWO_REACHABILITY_INIT, adj).unwrap()
    }

    #[test]
    fn truth_examples() {
        assert!(two_reachability_truth(&graph(2, &[(0, 1)])).unwrap());
        assert!(!two_reachability_truth(&graph(5, &[])).unwrap());
        assert!(!two_reachability_truth(&graph(4, &[(0, 1), (1, 2), (2, 3)])).unwrap());
        assert!(two_reachability_truth(&graph(1, &[])).is_err());
    }

    #[test]
    fn model_examples() {
        let m = build_two_reachability_model(3).unwrap();
        assert!(!run_local_iteration(&m, &graph(3, &[(0, 1)])).unwrap().0);
        assert!(run_local_iteration(&m, &graph(3, &[(0, 2)])).unwrap().0);
    }

    #[test]
    fn model_matches_truth_and_bfs() {
        for n in 2..=6 {
            let m = build_two_reachability_model(n).unwrap();
            let e = n * (n - 1) / 2;
            for adj in 0..1u128 << e {
                let inst = GraphInstance::new(n, TWO_REACHABILITY_INIT, adj).unwrap();
                let truth = two_reachability_truth(&inst).unwrap();
                assert_eq!(truth, bfs_within_two(&inst));
                assert_eq!(
                    run_local_iteration(&m, &inst).unwrap().0,
                    truth,
                    "n={n} {inst}"
                );
            }
        }
    }

    #[test]
    fn tree_size_is_linear() {
        for n in 3..=8 {
            let m = build_two_reachability_model(n).unwrap();
            let biggest = m.trees().iter().map(DecisionTree::size).max().unwrap();
            assert!(biggest <= 3 * n, "n={n} size={biggest}");
        }
    }
}
