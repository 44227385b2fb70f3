//! Tree-building DP over (clause, size budget) states.
//!
//! `best(S, s)` is the largest `Σ |w|` over the leaves of a tree of at most
//! `s` nodes hanging below `S` whose every path stays in the pool: either a
//! leaf labelled by the sign of `w_S`, or a split on `x_j` with both
//! `S ∪ {¬x_j}` and `S ∪ {x_j}` in the pool and budgets `s_L + s_R + 1 <= s`.

use std::collections::HashMap;

use crate::boolean_dt::{Clause, DecisionTree, Literal};
use crate::error::{Error, Result};

const TIE: f64 = 1e-12;

#[derive(Clone, Copy, Debug)]
enum Choice {
    Leaf,
    Split {
        var: u16,
        lo: u32,
        hi: u32,
        budget_lo: u16,
    },
}

#[derive(Clone, Copy, Debug)]
struct Cell {
    value: f64,
    size: u32,
    choice: Choice,
}

impl Cell {
    fn first_var(&self) -> u32 {
        match self.choice {
            Choice::Leaf => 0,
            Choice::Split { var, .. } => var as u32 + 1,
        }
    }

    /// Higher value, then smaller tree, then lower split variable.
    fn beats(&self, other: &Cell) -> bool {
        if self.value > other.value + TIE {
            return true;
        }
        if self.value < other.value - TIE {
            return false;
        }
        (self.size, self.first_var()) < (other.size, other.first_var())
    }
}

/// DP tables for one vertex pool.
pub struct TreeDp<'a> {
    pool: &'a [Clause],
    weights: Vec<f64>,
    max_size: usize,
    depth_bound: usize,
    /// `(lo child, hi child, var)` for every usable split of each clause.
    splits: Vec<Vec<(u32, u32, u16)>>,
    /// `table[i][b]` for odd budgets `2b + 1`.
    table: Vec<Vec<Option<Cell>>>,
    root: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DpResult {
    pub tree: DecisionTree,
    pub value: f64,
}

impl<'a> TreeDp<'a> {
    /// `pool` holds clause bodies; the empty body is the root.
    pub fn new(
        pool: &'a [Clause],
        weights: &[f64],
        max_size: usize,
        depth_bound: usize,
    ) -> Result<Self> {
        if pool.is_empty() {
            return Err(Error::EmptyPool("tree DP over an empty pool".into()));
        }
        if weights.len() != pool.len() {
            return Err(Error::Dimension(format!(
                "{} weights for {} clauses",
                weights.len(),
                pool.len()
            )));
        }
        let index: HashMap<Clause, usize> = pool
            .iter()
            .enumerate()
            .map(|(i, c)| (c.canonical(), i))
            .collect();
        let root = *index
            .get(&Clause::empty())
            .ok_or_else(|| Error::EmptyPool("pool has no root (empty) clause".into()))?;
        let mut vars: Vec<usize> = pool
            .iter()
            .flat_map(|c| c.literals().iter().map(|l| l.var()))
            .collect();
        vars.sort_unstable();
        vars.dedup();
        let splits = pool
            .iter()
            .map(|c| {
                let c = c.canonical();
                vars.iter()
                    .filter(|&&v| !c.contains_var(v))
                    .filter_map(|&v| {
                        let lo = index.get(&c.extended(Literal::neg(v)))?;
                        let hi = index.get(&c.extended(Literal::pos(v)))?;
                        Some((*lo as u32, *hi as u32, v as u16))
                    })
                    .collect()
            })
            .collect();
        let budgets = max_size.max(1).div_ceil(2);
        Ok(TreeDp {
            pool,
            weights: weights.to_vec(),
            max_size: max_size.max(1),
            depth_bound,
            splits,
            table: vec![vec![None; budgets]; pool.len()],
            root,
        })
    }

    /// New weights on the same pool; the split structure is kept.
    pub fn reweight(&mut self, weights: &[f64]) -> Result<()> {
        if weights.len() != self.pool.len() {
            return Err(Error::Dimension(format!(
                "{} weights for {} clauses",
                weights.len(),
                self.pool.len()
            )));
        }
        self.weights.copy_from_slice(weights);
        self.table.iter_mut().for_each(|row| row.fill(None));
        Ok(())
    }

    fn cell(&mut self, i: usize, b: usize) -> Cell {
        if let Some(c) = self.table[i][b] {
            return c;
        }
        let w = self.weights[i];
        let mut best = Cell {
            value: w.abs(),
            size: 1,
            choice: Choice::Leaf,
        };
        if b > 0 && self.pool[i].len() < self.depth_bound {
            for k in 0..self.splits[i].len() {
                let (lo, hi, var) = self.splits[i][k];
                // children budgets 2bl+1 and 2br+1 with bl + br = b - 1
                for bl in 0..b {
                    let left = self.cell(lo as usize, bl);
                    let right = self.cell(hi as usize, b - 1 - bl);
                    let cand = Cell {
                        value: left.value + right.value,
                        size: 1 + left.size + right.size,
                        choice: Choice::Split {
                            var,
                            lo,
                            hi,
                            budget_lo: bl as u16,
                        },
                    };
                    if cand.beats(&best) {
                        best = cand;
                    }
                }
            }
        }
        self.table[i][b] = Some(best);
        best
    }

    fn build(&mut self, i: usize, b: usize) -> DecisionTree {
        let c = self.cell(i, b);
        match c.choice {
            Choice::Leaf => DecisionTree::leaf(self.weights[i] >= 0.0),
            Choice::Split {
                var,
                lo,
                hi,
                budget_lo,
            } => {
                let bl = budget_lo as usize;
                let left = self.build(lo as usize, bl);
                let right = self.build(hi as usize, b - 1 - bl);
                DecisionTree::split(var as usize, left, right)
            }
        }
    }

    /// Optimal tree with at most `size` nodes.
    pub fn best(&mut self, size: usize) -> DpResult {
        let b = (size.clamp(1, self.max_size) - 1) / 2;
        let value = self.cell(self.root, b).value;
        DpResult {
            tree: self.build(self.root, b),
            value,
        }
    }

    /// Distinct optimal trees over budgets `1, 3, .., max_size`, best value
    /// first, at most `count` of them.
    pub fn candidates(&mut self, count: usize) -> Vec<DpResult> {
        let mut out: Vec<DpResult> = Vec::new();
        for size in (1..=self.max_size).step_by(2) {
            let r = self.best(size);
            if !out.iter().any(|o| o.tree == r.tree) {
                out.push(r);
            }
        }
        out.sort_by(|a, b| {
            b.value
                .total_cmp(&a.value)
                .then(a.tree.size().cmp(&b.tree.size()))
        });
        out.truncate(count);
        out
    }
}

/// Best tree of at most `s` nodes and depth `depth_bound` on a weighted pool.
pub fn tree_dp_single(
    pool: &[Clause],
    weights: &[f64],
    s: usize,
    depth_bound: usize,
) -> Result<DpResult> {
    Ok(TreeDp::new(pool, weights, s, depth_bound)?.best(s))
}

/// `Σ_leaves (2·label − 1) w_leaf`; errors if a leaf is outside the pool.
pub fn tree_value(tree: &DecisionTree, pool: &[Clause], weights: &[f64]) -> Result<f64> {
    let index: HashMap<Clause, usize> = pool
        .iter()
        .enumerate()
        .map(|(i, c)| (c.canonical(), i))
        .collect();
    let mut total = 0.0;
    for (c, label) in tree.leaf_paths() {
        let i = index
            .get(&c.canonical())
            .ok_or_else(|| Error::Invalid(format!("leaf {c} outside the pool")))?;
        total += if label { weights[*i] } else { -weights[*i] };
    }
    Ok(total)
}

/// Every tree of at most `max_size` nodes and body depth `depth_bound` whose
/// paths all lie in `pool`, smallest first. Fails past `cap` trees.
pub fn pool_trees(
    pool: &[Clause],
    max_size: usize,
    depth_bound: usize,
    cap: usize,
) -> Result<Vec<DecisionTree>> {
    let set: std::collections::HashSet<Clause> = pool.iter().map(Clause::canonical).collect();
    if !set.contains(&Clause::empty()) {
        return Err(Error::EmptyPool("pool has no root (empty) clause".into()));
    }
    let mut vars: Vec<usize> = set
        .iter()
        .flat_map(|c| c.literals().iter().map(|l| l.var()))
        .collect();
    vars.sort_unstable();
    vars.dedup();
    let mut memo = HashMap::new();
    let mut out = grow(
        &Clause::empty(),
        max_size.max(1),
        depth_bound,
        &set,
        &vars,
        cap,
        &mut memo,
    )?;
    out.sort_by_key(DecisionTree::size);
    Ok(out)
}

type TreeMemo = HashMap<(Clause, usize), Vec<DecisionTree>>;

fn grow(
    c: &Clause,
    budget: usize,
    depth_bound: usize,
    set: &std::collections::HashSet<Clause>,
    vars: &[usize],
    cap: usize,
    memo: &mut TreeMemo,
) -> Result<Vec<DecisionTree>> {
    if let Some(t) = memo.get(&(c.clone(), budget)) {
        return Ok(t.clone());
    }
    let mut out = vec![DecisionTree::leaf(false), DecisionTree::leaf(true)];
    if budget >= 3 && c.len() < depth_bound {
        for &v in vars {
            if c.contains_var(v) {
                continue;
            }
            let (lo, hi) = (c.extended(Literal::neg(v)), c.extended(Literal::pos(v)));
            if !set.contains(&lo) || !set.contains(&hi) {
                continue;
            }
            let lefts = grow(&lo, budget - 2, depth_bound, set, vars, cap, memo)?;
            for left in &lefts {
                let rights = grow(
                    &hi,
                    budget - 1 - left.size(),
                    depth_bound,
                    set,
                    vars,
                    cap,
                    memo,
                )?;
                for right in rights {
                    out.push(DecisionTree::split(v, left.clone(), right));
                    if out.len() > cap {
                        return Err(Error::Resource(format!("more than {cap} pool trees")));
                    }
                }
            }
        }
    }
    memo.insert((c.clone(), budget), out.clone());
    Ok(out)
}
