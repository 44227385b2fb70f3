use crate::bits::mask;
use crate::boolean_dt::{
    compose_with_selector, random_tree, selector_tree, DecisionTree, TreeBundle,
};
use crate::error::{Error, Result};

use super::encoding::{GraphInstance, InputEncoding};

/// `A^l[T]`: `l` synchronous rounds of per-vertex decision-tree updates on
/// one-bit hidden states. Vertices are 0-based; the output is the state of
/// vertex `n - 1` after round `l`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LocalIterationModel {
    enc: InputEncoding,
    l: usize,
    selector: DecisionTree,
    trees: Vec<DecisionTree>,
    global: DecisionTree,
}

/// Hidden states `h[t]`, bit `v` of row `t` is `h_{v,t}`. Row 0 is `Init`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trace {
    pub n: usize,
    pub h: Vec<u64>,
}

impl Trace {
    pub fn get(&self, t: usize, v: usize) -> bool {
        (self.h[t] >> v) & 1 == 1
    }

    pub fn rounds(&self) -> usize {
        self.h.len() - 1
    }
}

impl LocalIterationModel {
    pub fn new(n: usize, l: usize, trees: Vec<DecisionTree>) -> Result<Self> {
        let enc = InputEncoding::new(n)?;
        let global = compose_with_selector(&trees, &enc)?;
        Ok(LocalIterationModel {
            enc,
            l,
            selector: selector_tree(&enc),
            trees,
            global,
        })
    }

    pub fn n(&self) -> usize {
        self.enc.n
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn encoding(&self) -> &InputEncoding {
        &self.enc
    }

    pub fn selector(&self) -> &DecisionTree {
        &self.selector
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    /// Selector with each vertex leaf replaced by that vertex's tree.
    pub fn global_tree(&self) -> &DecisionTree {
        &self.global
    }

    /// Largest per-vertex tree depth.
    pub fn vertex_depth(&self) -> usize {
        self.trees
            .iter()
            .map(DecisionTree::depth)
            .max()
            .unwrap_or(0)
    }

    fn check(&self, inst: &GraphInstance) -> Result<()> {
        if inst.n != self.enc.n {
            return Err(Error::Dimension(format!(
                "instance has n={}, model has n={}",
                inst.n, self.enc.n
            )));
        }
        Ok(())
    }

    #[inline]
    fn step(&self, inst: &GraphInstance, prev: u64, order: impl Iterator<Item = usize>) -> u64 {
        let mut next = 0u64;
        for v in order {
            if self.trees[v].eval(&self.enc.encode(v, inst, prev)) {
                next |= 1 << v;
            }
        }
        next
    }

    /// Output bit only. Per-vertex trees are evaluated directly, which equals
    /// routing through the global tree.
    #[inline]
    pub fn output(&self, inst: &GraphInstance) -> bool {
        let n = self.enc.n;
        if self.l == 0 {
            return inst.init_bit(n - 1);
        }
        let mut h = inst.init & mask(n) as u64;
        for _ in 1..self.l {
            h = self.step(inst, h, 0..n);
        }
        self.trees[n - 1].eval(&self.enc.encode(n - 1, inst, h))
    }

    pub fn to_bundle(&self) -> TreeBundle {
        TreeBundle {
            n: self.enc.n,
            l: Some(self.l),
            trees: self.trees.clone(),
        }
    }

    pub fn from_bundle(b: &TreeBundle, default_l: usize) -> Result<Self> {
        Self::new(b.n, b.l.unwrap_or(default_l), b.trees.clone())
    }
}

/// Model with an independent complete random tree of `depth` per vertex over
/// the edge and dp bits.
pub fn random_model<R: rand::Rng + ?Sized>(
    n: usize,
    l: usize,
    depth: usize,
    rng: &mut R,
) -> Result<LocalIterationModel> {
    let enc = InputEncoding::new(n)?;
    let domain = enc.body_vars();
    let trees = (0..n)
        .map(|_| random_tree(depth, &domain, rng))
        .collect::<Result<Vec<_>>>()?;
    LocalIterationModel::new(n, l, trees)
}

/// Runs the iteration through the global tree, returning the output and the
/// full trace.
pub fn run_local_iteration(
    model: &LocalIterationModel,
    inst: &GraphInstance,
) -> Result<(bool, Trace)> {
    run_in_order(model, inst, &(0..model.n()).collect::<Vec<_>>())
}

/// Same as [`run_local_iteration`] but visits vertices in `order` inside each
/// round. The result never depends on the order.
pub fn run_in_order(
    model: &LocalIterationModel,
    inst: &GraphInstance,
    order: &[usize],
) -> Result<(bool, Trace)> {
    model.check(inst)?;
    let n = model.n();
    let mut h = vec![inst.init & mask(n) as u64];
    for _ in 0..model.l {
        let prev = *h.last().unwrap();
        let mut next = 0u64;
        for &v in order {
            if model.global.eval(&model.enc.encode(v, inst, prev)) {
                next |= 1 << v;
            }
        }
        h.push(next);
    }
    let out = (h[model.l] >> (n - 1)) & 1 == 1;
    Ok((out, Trace { n, h }))
}
