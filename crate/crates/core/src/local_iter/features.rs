//! Key features `A^l[AND_S]` and their junta structure.
//!
//! With a conjunction as the aggregator every round collapses to one bit.
//! Let `C` be the set of vertices whose code satisfies the id literals of `S`
//! and `E` whether the edge literals hold. A vertex fires in round `t` iff it
//! is in `C`, `E` holds and the dp literals hold on round `t - 1`. Since every
//! round after the first is either `C` or empty, the whole run is a short
//! recurrence on one bit and reads only the init and edge bits named by `S`.

use std::collections::BTreeSet;

use crate::bits::mask;
use crate::boolean_dt::Clause;

use super::encoding::{GraphInstance, InputEncoding, VarKind};

/// One free input bit of a graph instance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum InputBit {
    Init(usize),
    Edge(usize),
}

impl InputBit {
    /// Position in [`GraphInstance::index`].
    pub fn position(self, n: usize) -> usize {
        match self {
            InputBit::Init(v) => v,
            InputBit::Edge(k) => n + k,
        }
    }

    pub fn from_position(pos: usize, n: usize) -> Self {
        if pos < n {
            InputBit::Init(pos)
        } else {
            InputBit::Edge(pos - n)
        }
    }
}

/// Clause split by variable kind, ready for repeated evaluation.
#[derive(Clone, Debug)]
pub struct CompiledFeature {
    n: usize,
    l: usize,
    vertices: u64,
    edge_on: u128,
    edge_off: u128,
    dp_on: u64,
    dp_off: u64,
}

impl CompiledFeature {
    pub fn new(s: &Clause, l: usize, enc: &InputEncoding) -> Self {
        let n = enc.n;
        let mut vertices = mask(n) as u64;
        let (mut edge_on, mut edge_off, mut dp_on, mut dp_off) = (0u128, 0u128, 0u64, 0u64);
        for lit in s.literals() {
            match enc.kind(lit.var()) {
                VarKind::Id(j) => {
                    for v in 0..n {
                        if enc.id_bit(v, j) != lit.positive {
                            vertices &= !(1 << v);
                        }
                    }
                }
                VarKind::Edge(k) if lit.positive => edge_on |= 1 << k,
                VarKind::Edge(k) => edge_off |= 1 << k,
                VarKind::Dp(u) if lit.positive => dp_on |= 1 << u,
                VarKind::Dp(u) => dp_off |= 1 << u,
            }
        }
        CompiledFeature {
            n,
            l,
            vertices,
            edge_on,
            edge_off,
            dp_on,
            dp_off,
        }
    }

    #[inline]
    fn dp_ok(&self, h: u64) -> bool {
        h & self.dp_on == self.dp_on && h & self.dp_off == 0
    }

    #[inline]
    pub fn eval(&self, inst: &GraphInstance) -> bool {
        let last = self.n - 1;
        if self.l == 0 {
            return inst.init_bit(last);
        }
        if (self.vertices >> last) & 1 == 0 {
            return false;
        }
        if inst.adj & self.edge_on != self.edge_on || inst.adj & self.edge_off != 0 {
            return false;
        }
        let mut fired = self.dp_ok(inst.init);
        if self.l > 1 {
            let on_c = self.dp_ok(self.vertices);
            let on_empty = self.dp_ok(0);
            for _ in 1..self.l {
                fired = if fired { on_c } else { on_empty };
            }
        }
        fired
    }
}

/// `A^l[AND_S]` on one instance via the collapsed recurrence.
pub fn feature_value(s: &Clause, inst: &GraphInstance, l: usize, n: usize) -> bool {
    let enc = InputEncoding::new(n).expect("valid vertex count");
    CompiledFeature::new(s, l, &enc).eval(inst)
}

/// `A^l[AND_S]` by simulating every vertex in every round.
pub fn feature_value_naive(s: &Clause, inst: &GraphInstance, l: usize, n: usize) -> bool {
    let enc = InputEncoding::new(n).expect("valid vertex count");
    let mut h = inst.init;
    for _ in 0..l {
        let mut next = 0u64;
        for v in 0..n {
            if s.eval(&enc.encode(v, inst, h)) {
                next |= 1 << v;
            }
        }
        h = next;
    }
    (h >> (n - 1)) & 1 == 1
}

/// Input bits `A^l[AND_S]` can depend on: the init bits named by dp
/// literals and the edge bits named by edge literals (and only the last
/// vertex's init bit when `l = 0`).
pub fn dependency_set(s: &Clause, l: usize, n: usize) -> BTreeSet<InputBit> {
    let enc = InputEncoding::new(n).expect("valid vertex count");
    if l == 0 {
        return BTreeSet::from([InputBit::Init(n - 1)]);
    }
    s.literals()
        .iter()
        .filter_map(|lit| match enc.kind(lit.var()) {
            VarKind::Id(_) => None,
            VarKind::Edge(k) => Some(InputBit::Edge(k)),
            VarKind::Dp(u) => Some(InputBit::Init(u)),
        })
        .collect()
}

/// Bits a function of the instance actually depends on, found by flipping
/// every bit of every instance. Exponential; for small `n` only.
pub fn brute_force_support(n: usize, f: impl Fn(&GraphInstance) -> bool) -> BTreeSet<InputBit> {
    let bits = GraphInstance::input_bits(n);
    let table: Vec<bool> = GraphInstance::enumerate(n).map(|g| f(&g)).collect();
    (0..bits)
        .filter(|&b| (0..table.len()).any(|i| table[i] != table[i ^ (1 << b)]))
        .map(|b| InputBit::from_position(b, n))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boolean_dt::Literal;
    use crate::rng::seeded;
    use rand::Rng;

    fn random_clause(enc: &InputEncoding, len: usize, rng: &mut impl Rng) -> Clause {
        (0..len)
            .map(|_| Literal::new(rng.gen_range(0..enc.d), rng.gen()))
            .collect()
    }

    #[test]
    fn empty_clause_is_one() {
        for l in 1..4 {
            for inst in GraphInstance::enumerate(3) {
                assert!(feature_value(&Clause::empty(), &inst, l, 3));
            }
        }
    }

    #[test]
    fn single_dp_literal_copies_init() {
        let enc = InputEncoding::new(4).unwrap();
        for u in 0..4 {
            let pos = Clause::new(vec![Literal::pos(enc.dp_var(u))]);
            let neg = Clause::new(vec![Literal::neg(enc.dp_var(u))]);
            for inst in GraphInstance::enumerate(4).step_by(7) {
                assert_eq!(feature_value(&pos, &inst, 1, 4), inst.init_bit(u));
                assert_eq!(feature_value(&neg, &inst, 2, 4), inst.init_bit(u));
            }
        }
    }

    #[test]
    fn fast_path_matches_simulation() {
        let mut rng = seeded(11);
        for n in 1..=4 {
            let enc = InputEncoding::new(n).unwrap();
            for _ in 0..40 {
                let s = random_clause(&enc, rng.gen_range(0..5), &mut rng);
                let l = rng.gen_range(0..5);
                for inst in GraphInstance::enumerate(n) {
                    assert_eq!(
                        feature_value(&s, &inst, l, n),
                        feature_value_naive(&s, &inst, l, n),
                        "{s} l={l}"
                    );
                }
            }
        }
    }

    #[test]
    fn dependency_examples() {
        let enc = InputEncoding::new(4).unwrap();
        assert!(dependency_set(&Clause::empty(), 2, 4).is_empty());
        let s = Clause::new(vec![Literal::pos(enc.dp_var(2))]);
        assert_eq!(
            dependency_set(&s, 1, 4),
            BTreeSet::from([InputBit::Init(2)])
        );
        assert_eq!(
            brute_force_support(4, |g| feature_value(&s, g, 1, 4)),
            dependency_set(&s, 1, 4)
        );
        let s = Clause::new(vec![
            Literal::pos(enc.edge_var(0, 1)),
            Literal::pos(enc.dp_var(0)),
        ]);
        let want = BTreeSet::from([InputBit::Edge(enc.edge_index(0, 1)), InputBit::Init(0)]);
        assert_eq!(dependency_set(&s, 1, 4), want);
        assert_eq!(brute_force_support(4, |g| feature_value(&s, g, 1, 4)), want);
    }

    #[test]
    fn support_is_within_dependency_set() {
        let mut rng = seeded(12);
        for _ in 0..100 {
            let n = rng.gen_range(1..=4);
            let enc = InputEncoding::new(n).unwrap();
            let s = random_clause(&enc, rng.gen_range(0..5), &mut rng);
            let l = rng.gen_range(0..5);
            let support = brute_force_support(n, |g| feature_value(&s, g, l, n));
            assert!(support.is_subset(&dependency_set(&s, l, n)), "{s} l={l}");
        }
    }
}
