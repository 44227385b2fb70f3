use rand::Rng;

use super::clause::{Clause, Literal};
use crate::bits::Bits;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Node {
    Leaf(bool),
    /// `lo` is taken when the variable is 0, `hi` when it is 1.
    Split {
        var: u16,
        lo: u32,
        hi: u32,
    },
}

/// A binary decision tree over Boolean inputs.
///
/// Nodes live in a preorder arena with the root at index 0, so structurally
/// equal trees compare equal. Internal nodes test a variable: the false branch
/// is `lo` and the true branch is `hi`; the polarity of a path literal is the
/// branch actually followed.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DecisionTree {
    nodes: Vec<Node>,
    depth: usize,
}

impl DecisionTree {
    pub fn leaf(label: bool) -> Self {
        DecisionTree {
            nodes: vec![Node::Leaf(label)],
            depth: 0,
        }
    }

    pub fn split(var: usize, lo: DecisionTree, hi: DecisionTree) -> Self {
        let lo_off = 1u32;
        let hi_off = 1 + lo.nodes.len() as u32;
        let mut nodes = Vec::with_capacity(1 + lo.nodes.len() + hi.nodes.len());
        nodes.push(Node::Split {
            var: var as u16,
            lo: lo_off,
            hi: hi_off,
        });
        let depth = 1 + lo.depth.max(hi.depth);
        for (off, sub) in [(lo_off, lo), (hi_off, hi)] {
            nodes.extend(sub.nodes.into_iter().map(|n| match n {
                Node::Leaf(b) => Node::Leaf(b),
                Node::Split { var, lo, hi } => Node::Split {
                    var,
                    lo: lo + off,
                    hi: hi + off,
                },
            }));
        }
        DecisionTree { nodes, depth }
    }

    /// Path-shaped tree computing the conjunction of `c` (in clause order).
    pub fn from_conjunction(c: &Clause) -> Self {
        c.literals()
            .iter()
            .rev()
            .fold(DecisionTree::leaf(true), |acc, lit| {
                if lit.positive {
                    DecisionTree::split(lit.var(), DecisionTree::leaf(false), acc)
                } else {
                    DecisionTree::split(lit.var(), acc, DecisionTree::leaf(false))
                }
            })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn root(&self) -> Node {
        self.nodes[0]
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Total node count (internal nodes plus leaves).
    pub fn size(&self) -> usize {
        self.nodes.len()
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf(_)))
            .count()
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self.nodes[0], Node::Leaf(_))
    }

    pub fn max_var(&self) -> Option<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { var, .. } => Some(*var as usize),
                Node::Leaf(_) => None,
            })
            .max()
    }

    pub fn vars(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            Node::Split { var, .. } => Some(*var as usize),
            Node::Leaf(_) => None,
        })
    }

    /// Subtree rooted at arena index `i`.
    pub fn subtree(&self, i: usize) -> DecisionTree {
        match self.nodes[i] {
            Node::Leaf(b) => DecisionTree::leaf(b),
            Node::Split { var, lo, hi } => DecisionTree::split(
                var as usize,
                self.subtree(lo as usize),
                self.subtree(hi as usize),
            ),
        }
    }

    #[inline]
    pub fn eval(&self, x: &Bits) -> bool {
        let mut i = 0usize;
        loop {
            match self.nodes[i] {
                Node::Leaf(b) => return b,
                Node::Split { var, lo, hi } => {
                    i = if x.get(var as usize) {
                        hi as usize
                    } else {
                        lo as usize
                    };
                }
            }
        }
    }

    pub fn eval_checked(&self, x: &Bits) -> Result<bool> {
        if let Some(v) = self.max_var() {
            if v >= x.len() {
                return Err(Error::EncodingMismatch(format!(
                    "tree reads x{v} but the input has {} bits",
                    x.len()
                )));
            }
        }
        Ok(self.eval(x))
    }

    /// Evaluates with some inputs unknown; `None` when routing hits an
    /// unknown variable.
    pub fn eval_partial(&self, known: impl Fn(usize) -> Option<bool>) -> Option<bool> {
        let mut i = 0usize;
        loop {
            match self.nodes[i] {
                Node::Leaf(b) => return Some(b),
                Node::Split { var, lo, hi } => {
                    i = if known(var as usize)? {
                        hi as usize
                    } else {
                        lo as usize
                    };
                }
            }
        }
    }

    /// Leaf clause reached by `x` together with its label.
    pub fn route(&self, x: &Bits) -> (Clause, bool) {
        let mut i = 0usize;
        let mut lits = Vec::new();
        loop {
            match self.nodes[i] {
                Node::Leaf(b) => return (Clause::new(lits), b),
                Node::Split { var, lo, hi } => {
                    let v = x.get(var as usize);
                    lits.push(Literal::new(var as usize, v));
                    i = if v { hi as usize } else { lo as usize };
                }
            }
        }
    }

    /// One clause per node in preorder; the root maps to the empty clause.
    pub fn root_prefix_paths(&self) -> Vec<Clause> {
        let mut out = Vec::with_capacity(self.size());
        self.visit(0, &mut Vec::new(), &mut |path, _| {
            out.push(Clause::new(path.to_vec()))
        });
        out
    }

    /// Clauses and labels of the leaves, left to right.
    pub fn leaf_paths(&self) -> Vec<(Clause, bool)> {
        let mut out = Vec::new();
        self.visit(0, &mut Vec::new(), &mut |path, node| {
            if let Node::Leaf(b) = node {
                out.push((Clause::new(path.to_vec()), b));
            }
        });
        out
    }

    fn visit(&self, i: usize, path: &mut Vec<Literal>, f: &mut impl FnMut(&[Literal], Node)) {
        let node = self.nodes[i];
        f(path, node);
        if let Node::Split { var, lo, hi } = node {
            path.push(Literal::neg(var as usize));
            self.visit(lo as usize, path, f);
            path.pop();
            path.push(Literal::pos(var as usize));
            self.visit(hi as usize, path, f);
            path.pop();
        }
    }

    /// Recomputes depth from the arena (cached value must agree).
    pub fn recomputed_depth(&self) -> usize {
        fn go(t: &DecisionTree, i: usize) -> usize {
            match t.nodes[i] {
                Node::Leaf(_) => 0,
                Node::Split { lo, hi, .. } => 1 + go(t, lo as usize).max(go(t, hi as usize)),
            }
        }
        go(self, 0)
    }

    /// Same shape with every leaf label flipped.
    pub fn complemented(&self) -> DecisionTree {
        DecisionTree {
            nodes: self
                .nodes
                .iter()
                .map(|n| match *n {
                    Node::Leaf(b) => Node::Leaf(!b),
                    s => s,
                })
                .collect(),
            depth: self.depth,
        }
    }
}

/// Checked evaluation on a `d`-bit input.
pub fn eval_tree(t: &DecisionTree, x: &Bits) -> Result<bool> {
    t.eval_checked(x)
}

pub fn root_prefix_paths(t: &DecisionTree) -> Vec<Clause> {
    t.root_prefix_paths()
}

/// Complete depth-`r` tree; variables are drawn uniformly from `domain`
/// without repeating an ancestor's variable, leaf labels are fair bits.
pub fn random_tree<R: Rng + ?Sized>(
    r: usize,
    domain: &[usize],
    rng: &mut R,
) -> Result<DecisionTree> {
    if domain.is_empty() {
        return Err(Error::Invalid("variable domain is empty".into()));
    }
    let mut distinct = domain.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < r {
        return Err(Error::InfeasibleDepth {
            needed: r,
            available: distinct.len(),
        });
    }
    Ok(grow(r, &mut distinct, rng))
}

fn grow<R: Rng + ?Sized>(r: usize, free: &mut Vec<usize>, rng: &mut R) -> DecisionTree {
    if r == 0 {
        return DecisionTree::leaf(rng.gen());
    }
    let k = rng.gen_range(0..free.len());
    let var = free.swap_remove(k);
    let lo = grow(r - 1, free, rng);
    let hi = grow(r - 1, free, rng);
    free.push(var);
    let last = free.len() - 1;
    free.swap(k, last);
    DecisionTree::split(var, lo, hi)
}
