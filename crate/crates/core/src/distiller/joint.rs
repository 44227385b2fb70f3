//! Phase-2 selection: picking one tree per vertex.
//!
//! The shortlist search starts from per-vertex DP candidates under the
//! marginal weights, scores their product by agreement with the source on a
//! shared instance bank, then refines each vertex by a best response: the DP
//! is rerun with weights that measure, per instance and round, how much
//! flipping that vertex's state would change agreement.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dp::{pool_trees, TreeDp};
use super::valuation::{Decomposition, ValuationTable};
use crate::boolean_dt::{Clause, DecisionTree, Node};
use crate::error::{Error, Result};
use crate::local_iter::{GraphInstance, InputEncoding, LocalIterationModel, VarKind, MAX_VERTICES};
use crate::rng::Rng;
use crate::source::SourceModel;

/// Words (of 64 instances) per parallel work item.
const CHUNK: usize = 8;

/// A variable as seen by one vertex: id bits are constants.
#[derive(Clone, Copy, Debug)]
enum VarRef {
    Const(bool),
    Edge(usize),
    Dp(usize),
}

fn var_ref(enc: &InputEncoding, u: usize, var: usize) -> VarRef {
    match enc.kind(var) {
        VarKind::Id(j) => VarRef::Const(enc.id_bit(u, j)),
        VarKind::Edge(k) => VarRef::Edge(k),
        VarKind::Dp(v) => VarRef::Dp(v),
    }
}

#[inline]
fn load(var: VarRef, edges: &[u64], h: &[u64]) -> u64 {
    match var {
        VarRef::Const(true) => !0,
        VarRef::Const(false) => 0,
        VarRef::Edge(k) => edges[k],
        VarRef::Dp(v) => h[v],
    }
}

#[derive(Clone, Copy, Debug)]
enum Op {
    Leaf(u64),
    Split { var: VarRef, lo: u32, hi: u32 },
}

/// Per-vertex trees flattened for evaluation on 64 instances at a time.
struct Compiled {
    n: usize,
    l: usize,
    ops: Vec<Vec<Op>>,
}

impl Compiled {
    fn new(trees: &[&DecisionTree], enc: &InputEncoding, l: usize) -> Compiled {
        let ops = trees
            .iter()
            .enumerate()
            .map(|(u, t)| {
                t.nodes()
                    .iter()
                    .map(|node| match *node {
                        Node::Leaf(b) => Op::Leaf(if b { !0 } else { 0 }),
                        Node::Split { var, lo, hi } => Op::Split {
                            var: var_ref(enc, u, var as usize),
                            lo,
                            hi,
                        },
                    })
                    .collect()
            })
            .collect();
        Compiled { n: enc.n, l, ops }
    }

    /// Follows the shared path while every lane agrees, then splits lanes.
    #[inline]
    fn eval(ops: &[Op], i: usize, edges: &[u64], h: &[u64]) -> u64 {
        let mut i = i;
        loop {
            match ops[i] {
                Op::Leaf(w) => return w,
                Op::Split { var, lo, hi } => {
                    let x = load(var, edges, h);
                    if x == 0 {
                        i = lo as usize;
                    } else if x == !0 {
                        i = hi as usize;
                    } else {
                        let a = Self::eval(ops, lo as usize, edges, h);
                        let b = Self::eval(ops, hi as usize, edges, h);
                        return (!x & a) | (x & b);
                    }
                }
            }
        }
    }

    /// Round `t` states from round `t - 1`.
    #[inline]
    fn step(&self, edges: &[u64], prev: &[u64], next: &mut [u64]) {
        for v in 0..self.n {
            next[v] = Self::eval(&self.ops[v], 0, edges, prev);
        }
    }

    /// Runs rounds `from + 1 ..= l` on `h` in place.
    #[inline]
    fn advance(&self, edges: &[u64], h: &mut [u64; MAX_VERTICES], from: usize) {
        let mut next = [0u64; MAX_VERTICES];
        for _ in from..self.l {
            self.step(edges, &h[..self.n], &mut next[..self.n]);
            *h = next;
        }
    }
}

/// Instances with the source's labels, shared by every score, stored
/// column-wise with 64 instances to a word.
#[derive(Clone, Debug)]
pub struct AgreementBank {
    pub insts: Vec<GraphInstance>,
    pub labels: Vec<bool>,
    /// The whole input space rather than a sample.
    pub enumerated: bool,
    n: usize,
    words: usize,
    /// Per word: `n` init columns, then the edge columns.
    cols: Vec<u64>,
    label_bits: Vec<u64>,
    valid: Vec<u64>,
}

impl AgreementBank {
    /// Enumerates the input space when it has at most `samples` points.
    pub fn new(source: &dyn SourceModel, samples: usize, rng: &mut Rng) -> Result<AgreementBank> {
        if samples == 0 {
            return Err(Error::Invalid("agreement needs at least one sample".into()));
        }
        let n = source.n();
        let bits = GraphInstance::input_bits(n);
        let (insts, enumerated): (Vec<GraphInstance>, bool) =
            if bits < 64 && (1u64 << bits) <= samples as u64 {
                (GraphInstance::enumerate(n).collect(), true)
            } else {
                (
                    (0..samples)
                        .map(|_| GraphInstance::random(n, rng))
                        .collect(),
                    false,
                )
            };
        let labels = source.predict_batch(&insts);
        Ok(AgreementBank::from_labelled(n, insts, labels, enumerated))
    }

    pub fn from_labelled(
        n: usize,
        insts: Vec<GraphInstance>,
        labels: Vec<bool>,
        enumerated: bool,
    ) -> AgreementBank {
        let e = n * (n - 1) / 2;
        let stride = n + e;
        let words = insts.len().div_ceil(64);
        let mut cols = vec![0u64; words * stride];
        let mut label_bits = vec![0u64; words];
        let mut valid = vec![0u64; words];
        for (i, (g, &y)) in insts.iter().zip(&labels).enumerate() {
            let (w, b) = (i / 64, i % 64);
            let row = &mut cols[w * stride..(w + 1) * stride];
            for v in 0..n {
                row[v] |= (g.init_bit(v) as u64) << b;
            }
            for k in 0..e {
                row[n + k] |= (g.edge(k) as u64) << b;
            }
            label_bits[w] |= (y as u64) << b;
            valid[w] |= 1 << b;
        }
        AgreementBank {
            insts,
            labels,
            enumerated,
            n,
            words,
            cols,
            label_bits,
            valid,
        }
    }

    pub fn len(&self) -> usize {
        self.insts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.insts.is_empty()
    }

    fn word(&self, w: usize) -> (&[u64], &[u64]) {
        let stride = self.n + self.n * (self.n - 1) / 2;
        let row = &self.cols[w * stride..(w + 1) * stride];
        row.split_at(self.n)
    }

    /// Fraction of bank instances where the trees reproduce the label.
    pub fn agreement(&self, trees: &[&DecisionTree], enc: &InputEncoding, l: usize) -> f64 {
        let c = Compiled::new(trees, enc, l);
        let out = enc.n - 1;
        let hits: u64 = (0..self.words)
            .into_par_iter()
            .with_min_len(CHUNK)
            .map(|w| {
                let (init, edges) = self.word(w);
                let mut h = [0u64; MAX_VERTICES];
                h[..c.n].copy_from_slice(init);
                c.advance(edges, &mut h, 0);
                (!(h[out] ^ self.label_bits[w]) & self.valid[w]).count_ones() as u64
            })
            .sum();
        hits as f64 / self.len() as f64
    }
}

/// Agreement rate with a two-sided Hoeffding half-width at level `delta`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Agreement {
    pub rate: f64,
    pub half_width: f64,
    pub samples: usize,
}

pub fn hoeffding_half_width(samples: usize, delta: f64) -> f64 {
    ((2.0 / delta).ln() / (2.0 * samples as f64)).sqrt()
}

/// Fraction of `samples` uniform instances on which `model` and `source` agree.
pub fn mc_agreement(
    model: &LocalIterationModel,
    source: &dyn SourceModel,
    samples: usize,
    delta: f64,
    rng: &mut Rng,
) -> Result<Agreement> {
    if samples == 0 {
        return Err(Error::Invalid("agreement needs at least one sample".into()));
    }
    if model.n() != source.n() {
        return Err(Error::Dimension(format!(
            "model has n={}, source has n={}",
            model.n(),
            source.n()
        )));
    }
    let insts: Vec<GraphInstance> = (0..samples)
        .map(|_| GraphInstance::random(model.n(), rng))
        .collect();
    let hits = insts
        .par_iter()
        .filter(|g| model.output(g) == source.predict(g))
        .count();
    Ok(Agreement {
        rate: hits as f64 / samples as f64,
        half_width: hoeffding_half_width(samples, delta),
        samples,
    })
}

/// Best-response weights for vertex `u`: the mean over bank instances and
/// rounds `t` of `agree(h_{u,t} := 1) − agree(h_{u,t} := 0)` on every body
/// satisfied by that round's input.
pub fn sensitivity_weights(
    bank: &AgreementBank,
    trees: &[&DecisionTree],
    enc: &InputEncoding,
    l: usize,
    u: usize,
    bodies: &[Clause],
) -> Vec<f64> {
    let c = Compiled::new(trees, enc, l);
    let n = enc.n;
    let out = n - 1;
    let lits: Vec<Vec<(VarRef, bool)>> = bodies
        .iter()
        .map(|b| {
            b.literals()
                .iter()
                .map(|lit| (var_ref(enc, u, lit.var()), lit.positive))
                .collect()
        })
        .collect();
    let totals: Vec<i64> = (0..bank.words)
        .into_par_iter()
        .with_min_len(CHUNK)
        .fold(
            || vec![0i64; bodies.len()],
            |mut acc, w| {
                let (init, edges) = bank.word(w);
                let (y, valid) = (bank.label_bits[w], bank.valid[w]);
                let mut h = vec![[0u64; MAX_VERTICES]; l + 1];
                h[0][..n].copy_from_slice(init);
                for t in 1..=l {
                    let (done, rest) = h.split_at_mut(t);
                    c.step(edges, &done[t - 1][..n], &mut rest[0][..n]);
                }
                for t in 1..=l {
                    let agree = |b: u64| {
                        let mut s = h[t];
                        s[u] = b;
                        c.advance(edges, &mut s, t);
                        !(s[out] ^ y) & valid
                    };
                    let (a1, a0) = (agree(!0), agree(0));
                    let (pos, neg) = (a1 & !a0, a0 & !a1);
                    if pos | neg == 0 {
                        continue;
                    }
                    let prev = &h[t - 1][..n];
                    for (k, body) in lits.iter().enumerate() {
                        let mut m = pos | neg;
                        for &(var, positive) in body {
                            let x = load(var, edges, prev);
                            m &= if positive { x } else { !x };
                            if m == 0 {
                                break;
                            }
                        }
                        acc[k] += (m & pos).count_ones() as i64 - (m & neg).count_ones() as i64;
                    }
                }
                acc
            },
        )
        .reduce(
            || vec![0i64; bodies.len()],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    let scale = 1.0 / bank.len() as f64;
    totals.into_iter().map(|t| t as f64 * scale).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShortlistConfig {
    /// Bodies kept per vertex, lowest probe error first.
    pub paths_per_vertex: usize,
    /// Candidate trees kept per vertex.
    pub candidates: usize,
    /// Largest candidate product scored exhaustively.
    pub product_cap: usize,
    /// Best-response sweeps over all vertices.
    pub refine_rounds: usize,
    /// Largest output-vertex tree list tried with best-response completion;
    /// 0 disables the step.
    pub explore_cap: usize,
}

impl Default for ShortlistConfig {
    fn default() -> Self {
        ShortlistConfig {
            paths_per_vertex: 200,
            candidates: 6,
            product_cap: 4096,
            refine_rounds: 8,
            explore_cap: 20_000,
        }
    }
}

/// Chosen trees plus search bookkeeping.
#[derive(Clone, Debug)]
pub struct Selection {
    pub trees: Vec<DecisionTree>,
    /// Bank agreement of `trees` (shortlist mode).
    pub agreement: Option<f64>,
    /// Valuation of `trees` (exact-joint mode).
    pub value: Option<f64>,
    pub paths_per_vertex: Vec<usize>,
    pub candidates_per_vertex: Vec<usize>,
    /// Output-vertex trees tried with best-response completion.
    pub explored: usize,
    /// Every tree product that was scored, with its bank agreement.
    pub scored: Vec<(Vec<DecisionTree>, f64)>,
}

/// Probe errors closer than this rank as ties.
pub const ERROR_RESOLUTION: f64 = 1e-9;

/// Bodies of vertex `u` ranked by probe error, then length, then canonical
/// order, truncated to `keep`. The empty body is always kept.
pub fn prune_vertex(dec: &Decomposition, u: usize, keep: usize) -> Vec<Clause> {
    let bucket = |b: &Clause| (dec.error_of(u, b) / ERROR_RESOLUTION).floor();
    let mut ranked: Vec<&Clause> = dec.bodies[u].iter().collect();
    ranked.sort_by(|a, b| {
        bucket(a)
            .total_cmp(&bucket(b))
            .then(a.len().cmp(&b.len()))
            .then(a.cmp(b))
    });
    let mut kept: Vec<Clause> = ranked.into_iter().take(keep).cloned().collect();
    if !kept.iter().any(Clause::is_empty) && dec.index_of(u, &Clause::empty()).is_some() {
        kept.pop();
        kept.push(Clause::empty());
    }
    kept.sort();
    kept
}

struct Search<'a> {
    bank: &'a AgreementBank,
    enc: InputEncoding,
    l: usize,
    scores: HashMap<Vec<DecisionTree>, f64>,
    order: Vec<Vec<DecisionTree>>,
}

impl<'a> Search<'a> {
    fn new(bank: &'a AgreementBank, enc: InputEncoding, l: usize) -> Self {
        Search {
            bank,
            enc,
            l,
            scores: HashMap::new(),
            order: Vec::new(),
        }
    }

    fn improves(&mut self, trees: &[DecisionTree], incumbent: &[DecisionTree]) -> bool {
        let a = (self.score(trees), total_size(trees));
        let b = (self.score(incumbent), total_size(incumbent));
        Self::better(a, b)
    }

    fn score(&mut self, trees: &[DecisionTree]) -> f64 {
        if let Some(&s) = self.scores.get(trees) {
            return s;
        }
        let refs: Vec<&DecisionTree> = trees.iter().collect();
        let s = self.bank.agreement(&refs, &self.enc, self.l);
        self.scores.insert(trees.to_vec(), s);
        self.order.push(trees.to_vec());
        s
    }

    /// Higher agreement wins; ties go to the smaller total size.
    fn better(a: (f64, usize), b: (f64, usize)) -> bool {
        a.0 > b.0 || (a.0 == b.0 && a.1 < b.1)
    }

    fn best_product(
        &mut self,
        cands: &[Vec<DecisionTree>],
        cap: usize,
        start: Vec<DecisionTree>,
    ) -> Vec<DecisionTree> {
        let count = cands
            .iter()
            .try_fold(1usize, |acc, c| acc.checked_mul(c.len().max(1)));
        let mut best = start.clone();
        let mut best_key = (self.score(&best), total_size(&best));
        if matches!(count, Some(c) if c <= cap) {
            let mut idx = vec![0usize; cands.len()];
            loop {
                let trees: Vec<DecisionTree> =
                    idx.iter().zip(cands).map(|(&i, c)| c[i].clone()).collect();
                let key = (self.score(&trees), total_size(&trees));
                if Self::better(key, best_key) {
                    best = trees;
                    best_key = key;
                }
                let mut u = 0;
                while u < idx.len() {
                    idx[u] += 1;
                    if idx[u] < cands[u].len() {
                        break;
                    }
                    idx[u] = 0;
                    u += 1;
                }
                if u == idx.len() {
                    return best;
                }
            }
        }
        // coordinate ascent from `start`
        loop {
            let mut improved = false;
            for (u, cu) in cands.iter().enumerate() {
                for t in cu {
                    let mut trees = best.clone();
                    trees[u] = t.clone();
                    let key = (self.score(&trees), total_size(&trees));
                    if Self::better(key, best_key) {
                        best = trees;
                        best_key = key;
                        improved = true;
                    }
                }
            }
            if !improved {
                return best;
            }
        }
    }
}

fn total_size(trees: &[DecisionTree]) -> usize {
    trees.iter().map(DecisionTree::size).sum()
}

fn push_candidate(list: &mut Vec<DecisionTree>, t: DecisionTree, cap: usize) {
    if list.contains(&t) {
        return;
    }
    list.push(t);
    if list.len() > cap {
        // drop the oldest non-incumbent entry
        list.remove(1);
    }
}

/// Shortlist selection: marginal-DP candidates, product search, then
/// best-response refinement scored on `bank`.
pub fn shortlist_select(
    dec: &Decomposition,
    table: &ValuationTable,
    bank: &AgreementBank,
    l: usize,
    max_size: usize,
    depth_bound: usize,
    cfg: &ShortlistConfig,
) -> Result<Selection> {
    let enc = dec.enc;
    let n = enc.n;
    if cfg.candidates == 0 || cfg.paths_per_vertex == 0 {
        return Err(Error::Invalid(
            "shortlist needs at least one path and one candidate per vertex".into(),
        ));
    }
    if bank.is_empty() {
        return Err(Error::Invalid("empty agreement bank".into()));
    }
    let pools: Vec<Vec<Clause>> = (0..n)
        .map(|u| prune_vertex(dec, u, cfg.paths_per_vertex))
        .collect();
    let mut dps: Vec<Option<TreeDp>> = pools
        .iter()
        .map(|p| TreeDp::new(p, &vec![0.0; p.len()], max_size, depth_bound).ok())
        .collect();
    let mut cands: Vec<Vec<DecisionTree>> = Vec::with_capacity(n);
    for (u, pool) in pools.iter().enumerate() {
        let weights: Vec<f64> = pool
            .iter()
            .map(|b| dec.index_of(u, b).map_or(0.0, |i| table.marginal[u][i]))
            .collect();
        let list = match dps[u].as_mut() {
            Some(dp) => {
                dp.reweight(&weights)?;
                dp.candidates(cfg.candidates)
                    .into_iter()
                    .map(|r| r.tree)
                    .collect()
            }
            None => {
                let root = dec
                    .index_of(u, &Clause::empty())
                    .map_or(0.0, |i| table.marginal[u][i]);
                vec![DecisionTree::leaf(root >= 0.0)]
            }
        };
        cands.push(list);
    }
    let mut ctx = Refiner {
        search: Search::new(bank, enc, l),
        pools: &pools,
        dps,
        max_size,
        cfg,
    };
    let start: Vec<DecisionTree> = cands.iter().map(|c| c[0].clone()).collect();
    let mut best = ctx.search.best_product(&cands, cfg.product_cap, start);
    best = ctx.refine(best, &mut cands)?;
    let mut explored = 0;
    if cfg.explore_cap > 0 {
        let out = n - 1;
        if let Ok(list) = pool_trees(&pools[out], max_size, depth_bound, cfg.explore_cap) {
            explored = list.len();
            let base = best.clone();
            for t in list {
                let mut trees = base.clone();
                trees[out] = t;
                for v in (0..out).rev() {
                    if let Some(r) = ctx.respond(&trees, v)? {
                        trees[v] = r;
                    }
                }
                if ctx.search.improves(&trees, &best) {
                    best = trees;
                }
            }
            best = ctx.refine(best, &mut cands)?;
        }
    }
    let mut search = ctx.search;
    best = search.best_product(&cands, cfg.product_cap, best);
    // the returned product is the best of everything scored
    let mut top = (search.score(&best), total_size(&best));
    for trees in &search.order {
        let key = (search.scores[trees], total_size(trees));
        if Search::better(key, top) {
            best = trees.clone();
            top = key;
        }
    }
    let scored = search
        .order
        .iter()
        .map(|t| (t.clone(), search.scores[t]))
        .collect();
    Ok(Selection {
        trees: best,
        agreement: Some(top.0),
        value: None,
        paths_per_vertex: pools.iter().map(Vec::len).collect(),
        candidates_per_vertex: cands.iter().map(Vec::len).collect(),
        explored,
        scored,
    })
}

struct Refiner<'a> {
    search: Search<'a>,
    pools: &'a [Vec<Clause>],
    dps: Vec<Option<TreeDp<'a>>>,
    max_size: usize,
    cfg: &'a ShortlistConfig,
}

impl Refiner<'_> {
    /// Best response of vertex `u` with every other tree fixed.
    fn respond(&mut self, trees: &[DecisionTree], u: usize) -> Result<Option<DecisionTree>> {
        let Some(dp) = self.dps[u].as_mut() else {
            return Ok(None);
        };
        let refs: Vec<&DecisionTree> = trees.iter().collect();
        let s = &self.search;
        let w = sensitivity_weights(s.bank, &refs, &s.enc, s.l, u, &self.pools[u]);
        dp.reweight(&w)?;
        Ok(Some(dp.best(self.max_size).tree))
    }

    /// Best-response sweeps, output vertex first, until a sweep stops
    /// improving agreement. Responses join the candidate lists.
    fn refine(
        &mut self,
        mut best: Vec<DecisionTree>,
        cands: &mut [Vec<DecisionTree>],
    ) -> Result<Vec<DecisionTree>> {
        let cap = self.cfg.candidates;
        for _ in 0..self.cfg.refine_rounds {
            let before = self.search.score(&best);
            for u in (0..best.len()).rev() {
                let Some(dp) = self.dps[u].as_mut() else {
                    continue;
                };
                let refs: Vec<&DecisionTree> = best.iter().collect();
                let s = &self.search;
                let w = sensitivity_weights(s.bank, &refs, &s.enc, s.l, u, &self.pools[u]);
                dp.reweight(&w)?;
                for r in dp.candidates(cap) {
                    let mut trees = best.clone();
                    trees[u] = r.tree.clone();
                    if self.search.improves(&trees, &best) {
                        best = trees;
                    }
                    push_candidate(&mut cands[u], r.tree, cap);
                }
                // keep the incumbent first so it survives truncation
                if let Some(pos) = cands[u].iter().position(|t| *t == best[u]) {
                    let t = cands[u].remove(pos);
                    cands[u].insert(0, t);
                } else {
                    cands[u].insert(0, best[u].clone());
                    cands[u].truncate(cap);
                }
            }
            if self.search.score(&best) <= before {
                break;
            }
        }
        Ok(best)
    }
}

/// Exact joint maximisation of the leaf-tuple valuation for one round.
///
/// With a single round only the output vertex's leaf labels enter the
/// valuation, so each choice of the other trees collapses the tuple table to
/// per-body weights for the output vertex and the single-tree DP is exact.
/// Other vertices' trees are enumerated smallest first; ties keep the first.
pub fn exact_joint_select(
    dec: &Decomposition,
    table: &ValuationTable,
    l: usize,
    max_size: usize,
    depth_bound: usize,
    tree_cap: usize,
) -> Result<Selection> {
    let enc = dec.enc;
    let n = enc.n;
    if n > 3 || l != 1 {
        return Err(Error::Invalid(format!(
            "exact-joint selection needs n <= 3 and l = 1, got n={n}, l={l}"
        )));
    }
    if table.tuples.is_none() {
        return Err(Error::Invalid(
            "exact-joint selection needs an exact-mode table".into(),
        ));
    }
    let out = n - 1;
    let others: Vec<Vec<DecisionTree>> = (0..out)
        .map(|u| pool_trees(&dec.bodies[u], max_size, depth_bound, tree_cap))
        .collect::<Result<_>>()?;
    let out_pool = &dec.bodies[out];
    let mut best: Option<(f64, usize, Vec<DecisionTree>)> = None;
    let mut idx = vec![0usize; out];
    loop {
        let fixed: Vec<&DecisionTree> = idx.iter().zip(&others).map(|(&i, c)| &c[i]).collect();
        let leaf_sets: Vec<Vec<usize>> = fixed
            .iter()
            .enumerate()
            .map(|(u, t)| {
                t.leaf_paths()
                    .into_iter()
                    .map(|(c, _)| {
                        dec.index_of(u, &c.canonical())
                            .expect("enumerated from the pool")
                    })
                    .collect()
            })
            .collect();
        let weights: Vec<f64> = (0..out_pool.len())
            .map(|s| collapse(table, &leaf_sets, s))
            .collect();
        let r = TreeDp::new(out_pool, &weights, max_size, depth_bound)?.best(max_size);
        let mut trees: Vec<DecisionTree> = fixed.into_iter().cloned().collect();
        trees.push(r.tree);
        let size = total_size(&trees);
        let better = match &best {
            None => true,
            Some((v, s, _)) => r.value > v + 1e-12 || ((r.value - v).abs() <= 1e-12 && size < *s),
        };
        if better {
            best = Some((r.value, size, trees));
        }
        let mut u = 0;
        while u < out {
            idx[u] += 1;
            if idx[u] < others[u].len() {
                break;
            }
            idx[u] = 0;
            u += 1;
        }
        if u == out {
            break;
        }
    }
    let (value, _, trees) = best.expect("at least one product");
    Ok(Selection {
        trees,
        agreement: None,
        value: Some(value),
        paths_per_vertex: dec.bodies.iter().map(Vec::len).collect(),
        candidates_per_vertex: others.iter().map(Vec::len).chain([1]).collect(),
        explored: 0,
        scored: Vec::new(),
    })
}

/// Sum of tuple weights over every leaf choice of the fixed vertices, with
/// the output vertex's body held at `s`.
fn collapse(table: &ValuationTable, leaf_sets: &[Vec<usize>], s: usize) -> f64 {
    let mut idx = vec![0usize; leaf_sets.len() + 1];
    let mut total = 0.0;
    let mut choice = vec![0usize; leaf_sets.len()];
    idx[leaf_sets.len()] = s;
    loop {
        for (u, set) in leaf_sets.iter().enumerate() {
            idx[u] = set[choice[u]];
        }
        total += table.tuple(&idx).expect("exact table present");
        let mut u = 0;
        while u < leaf_sets.len() {
            choice[u] += 1;
            if choice[u] < leaf_sets[u].len() {
                break;
            }
            choice[u] = 0;
            u += 1;
        }
        if u == leaf_sets.len() {
            return total;
        }
    }
}
