use std::collections::HashMap;

use super::tree::DecisionTree;
use crate::error::{Error, Result};

pub const MAX_MIN_TREE_VARS: usize = 16;

/// Truth table over `d` variables with a care mask. Entry `i` is the input
/// whose bit `j` is variable `j`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartialFunction {
    d: usize,
    value: Vec<bool>,
    care: Vec<bool>,
}

impl PartialFunction {
    pub fn new(d: usize, value: Vec<bool>, care: Vec<bool>) -> Result<Self> {
        if d > MAX_MIN_TREE_VARS {
            return Err(Error::Resource(format!(
                "{d} variables exceed the {MAX_MIN_TREE_VARS}-variable search bound"
            )));
        }
        if value.len() != 1 << d || care.len() != 1 << d {
            return Err(Error::Dimension(format!("tables must have 2^{d} entries")));
        }
        Ok(PartialFunction { d, value, care })
    }

    /// Fully specified function.
    pub fn total(d: usize, f: impl Fn(u32) -> bool) -> Result<Self> {
        if d > MAX_MIN_TREE_VARS {
            return Err(Error::Resource(format!(
                "{d} variables exceed the {MAX_MIN_TREE_VARS}-variable search bound"
            )));
        }
        let value = (0..1u32 << d).map(f).collect();
        Self::new(d, value, vec![true; 1 << d])
    }

    pub fn vars(&self) -> usize {
        self.d
    }

    pub fn value(&self, x: u32) -> bool {
        self.value[x as usize]
    }

    pub fn cares(&self, x: u32) -> bool {
        self.care[x as usize]
    }

    /// Restriction `var := bit`, marked as don't-care off the subcube. The
    /// variable count is unchanged.
    pub fn restricted(&self, var: usize, bit: bool) -> PartialFunction {
        let care = (0..1u32 << self.d)
            .map(|x| self.care[x as usize] && (((x >> var) & 1 == 1) == bit))
            .collect();
        PartialFunction {
            d: self.d,
            value: self.value.clone(),
            care,
        }
    }
}

const HAS0: u8 = 1;
const HAS1: u8 = 2;

/// Restriction of the input cube: `mask` marks fixed variables, `vals`
/// their values.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
struct Cube {
    mask: u32,
    vals: u32,
}

impl Cube {
    fn key(self) -> u64 {
        ((self.mask as u64) << 32) | self.vals as u64
    }

    fn fix(self, var: usize, bit: bool) -> Cube {
        Cube {
            mask: self.mask | 1 << var,
            vals: self.vals | (bit as u32) << var,
        }
    }
}

struct Search<'a> {
    f: &'a PartialFunction,
    full: u32,
    labels: HashMap<u64, u8>,
    best: HashMap<u64, (u32, u8)>,
}

impl Search<'_> {
    fn labels(&mut self, c: Cube) -> u8 {
        if c.mask == self.full {
            let x = c.vals as usize;
            return if !self.f.care[x] {
                0
            } else if self.f.value[x] {
                HAS1
            } else {
                HAS0
            };
        }
        if let Some(&l) = self.labels.get(&c.key()) {
            return l;
        }
        let var = (!c.mask & self.full).trailing_zeros() as usize;
        let l = self.labels(c.fix(var, false)) | self.labels(c.fix(var, true));
        self.labels.insert(c.key(), l);
        l
    }

    /// Minimum leaves on cube `c`, and the split variable (`u8::MAX` for a leaf).
    fn solve(&mut self, c: Cube) -> u32 {
        let lab = self.labels(c);
        if lab != HAS0 | HAS1 {
            return 1;
        }
        if let Some(&(v, _)) = self.best.get(&c.key()) {
            return v;
        }
        let mut best = (u32::MAX, u8::MAX);
        for var in 0..self.f.d {
            if c.mask & (1 << var) != 0 {
                continue;
            }
            let lo = self.solve(c.fix(var, false));
            if lo >= best.0 {
                continue;
            }
            let total = lo + self.solve(c.fix(var, true));
            if total < best.0 {
                best = (total, var as u8);
                if total == 2 {
                    break;
                }
            }
        }
        self.best.insert(c.key(), best);
        best.0
    }

    fn witness(&mut self, c: Cube) -> DecisionTree {
        let lab = self.labels(c);
        if lab != HAS0 | HAS1 {
            return DecisionTree::leaf(lab == HAS1);
        }
        self.solve(c);
        let (_, var) = self.best[&c.key()];
        let var = var as usize;
        DecisionTree::split(
            var,
            self.witness(c.fix(var, false)),
            self.witness(c.fix(var, true)),
        )
    }
}

/// Fewest leaves of any tree matching `f` on its care set, with a tree that
/// attains it. Memoized over subcubes; don't-care entries match either label.
pub fn min_tree_leaves(f: &PartialFunction) -> Result<(usize, DecisionTree)> {
    if f.d > MAX_MIN_TREE_VARS {
        return Err(Error::Resource(format!(
            "{} variables exceed the search bound",
            f.d
        )));
    }
    let full = if f.d == 32 {
        u32::MAX
    } else {
        (1u32 << f.d) - 1
    };
    let mut s = Search {
        f,
        full,
        labels: HashMap::new(),
        best: HashMap::new(),
    };
    let root = Cube { mask: 0, vals: 0 };
    let leaves = s.solve(root) as usize;
    let tree = s.witness(root);
    debug_assert_eq!(tree.leaf_count(), leaves);
    Ok((leaves, tree))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bits::Bits;
    use proptest::prelude::*;

    fn agrees(f: &PartialFunction, t: &DecisionTree) -> bool {
        (0..1u32 << f.vars()).all(|x| {
            !f.cares(x) || t.eval(&Bits::from_word(x as u128, f.vars()).unwrap()) == f.value(x)
        })
    }

    /// Every tree of depth at most `depth` over `d` variables, listed by
    /// brute force.
    fn all_trees(d: usize, depth: usize) -> Vec<DecisionTree> {
        let mut out = vec![DecisionTree::leaf(false), DecisionTree::leaf(true)];
        if depth == 0 {
            return out;
        }
        let sub = all_trees(d, depth - 1);
        for v in 0..d {
            for a in &sub {
                for b in &sub {
                    out.push(DecisionTree::split(v, a.clone(), b.clone()));
                }
            }
        }
        out
    }

    fn brute_min_leaves(f: &PartialFunction, depth: usize) -> usize {
        all_trees(f.vars(), depth)
            .iter()
            .filter(|t| agrees(f, t))
            .map(|t| t.leaf_count())
            .min()
            .unwrap()
    }

    #[test]
    fn constant_zero() {
        let f = PartialFunction::total(2, |_| false).unwrap();
        assert_eq!(min_tree_leaves(&f).unwrap().0, 1);
    }

    #[test]
    fn and_and_xor_match_exhaustive_search() {
        let and = PartialFunction::total(2, |x| x == 0b11).unwrap();
        let xor = PartialFunction::total(2, |x| (x ^ (x >> 1)) & 1 == 1).unwrap();
        assert_eq!(brute_min_leaves(&and, 2), 3);
        assert_eq!(brute_min_leaves(&xor, 2), 4);
        let (k, t) = min_tree_leaves(&and).unwrap();
        assert_eq!(k, 3);
        assert!(agrees(&and, &t));
        let (k, t) = min_tree_leaves(&xor).unwrap();
        assert_eq!(k, 4);
        assert!(agrees(&xor, &t));
    }

    #[test]
    fn dont_cares_match_either_label() {
        // x0 AND x1, but only x0 = 1 inputs matter: the answer is x1 alone.
        let f = PartialFunction::new(
            2,
            vec![false, false, false, true],
            vec![false, true, false, true],
        )
        .unwrap();
        assert_eq!(min_tree_leaves(&f).unwrap().0, 2);
    }

    #[test]
    fn rejects_large_inputs() {
        assert!(matches!(
            PartialFunction::total(17, |_| true),
            Err(Error::Resource(_))
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn witness_is_correct_and_optimal(table in proptest::collection::vec(any::<bool>(), 8),
                                          care in proptest::collection::vec(any::<bool>(), 8)) {
            let f = PartialFunction::new(3, table, care).unwrap();
            let (k, t) = min_tree_leaves(&f).unwrap();
            prop_assert!(agrees(&f, &t));
            prop_assert_eq!(t.leaf_count(), k);
            prop_assert_eq!(k, brute_min_leaves(&f, 3));
        }

        #[test]
        fn restriction_never_increases_minimum(table in proptest::collection::vec(any::<bool>(), 16),
                                               var in 0usize..4, bit in any::<bool>()) {
            let f = PartialFunction::total(4, |x| table[x as usize]).unwrap();
            let g = f.restricted(var, bit);
            prop_assert!(min_tree_leaves(&g).unwrap().0 <= min_tree_leaves(&f).unwrap().0);
        }
    }
}
