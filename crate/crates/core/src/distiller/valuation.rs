use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::pool::{vertex_of, PathPool};
use crate::bits::Bits;
use crate::boolean_dt::{Clause, DecisionTree, Literal};
use crate::error::{Error, Result};
use crate::local_iter::{GraphInstance, InputEncoding, VarKind};
use crate::rng::Rng;
use crate::source::SourceModel;

/// Pool split by selector prefix. Vertex entries hold clause bodies (the
/// selector literals stripped), sorted, with the empty body first.
#[derive(Clone, Debug)]
pub struct Decomposition {
    pub enc: InputEncoding,
    /// Selector-internal prefixes, kept for assembly only.
    pub internal: Vec<Clause>,
    pub bodies: Vec<Vec<Clause>>,
    /// Held-out probe error per body; unprobed bodies inherit their parent's.
    pub errors: Vec<HashMap<Clause, f64>>,
}

impl Decomposition {
    pub fn total(&self) -> usize {
        self.internal.len() + self.bodies.iter().map(Vec::len).sum::<usize>()
    }

    pub fn index_of(&self, u: usize, body: &Clause) -> Option<usize> {
        self.bodies[u].binary_search(body).ok()
    }

    /// Probe error of a body, `+inf` when nothing on its path was probed.
    pub fn error_of(&self, u: usize, body: &Clause) -> f64 {
        self.errors[u].get(body).copied().unwrap_or(f64::INFINITY)
    }
}

fn body_of(c: &Clause, enc: &InputEncoding) -> Clause {
    c.filtered(|l| !matches!(enc.kind(l.var()), VarKind::Id(_)))
}

fn is_internal_prefix(c: &Clause, enc: &InputEncoding) -> bool {
    c.len() < enc.id_bits
        && c.literals()
            .iter()
            .enumerate()
            .all(|(j, l)| l.var() == enc.id_var(j))
}

/// Splits a pool by vertex. Full selector paths become empty bodies of their
/// vertex; strict prefixes go to the internal set.
pub fn decompose_pool(pool: &PathPool) -> Result<Decomposition> {
    decompose_clauses(&pool.union(), &pool.enc, |c| {
        pool.records.get(c).map(|o| o.test_risk)
    })
}

pub fn decompose_clauses(
    clauses: &[Clause],
    enc: &InputEncoding,
    error: impl Fn(&Clause) -> Option<f64>,
) -> Result<Decomposition> {
    let mut internal = Vec::new();
    let mut bodies = vec![Vec::new(); enc.n];
    let mut raw: Vec<Vec<(Clause, Option<f64>)>> = vec![Vec::new(); enc.n];
    for c in clauses {
        let c = c.canonical();
        if is_internal_prefix(&c, enc) {
            internal.push(c);
            continue;
        }
        let u = vertex_of(&c, enc).ok_or_else(|| {
            Error::PoolCorruption(format!("{c} does not start with a selector path"))
        })?;
        let body = body_of(&c, enc);
        raw[u].push((body.clone(), error(&c)));
        bodies[u].push(body);
    }
    let mut errors = vec![HashMap::new(); enc.n];
    for u in 0..enc.n {
        bodies[u].sort();
        bodies[u].dedup();
        let own: HashMap<Clause, f64> = raw[u]
            .iter()
            .filter_map(|(b, e)| e.map(|e| (b.clone(), e)))
            .collect();
        // shorter bodies first so parents are resolved before children
        let mut order: Vec<&Clause> = bodies[u].iter().collect();
        order.sort_by_key(|b| b.len());
        for b in order {
            let e = own
                .get(b)
                .copied()
                .or_else(|| parent_error(b, &errors[u]))
                .unwrap_or(f64::INFINITY);
            errors[u].insert(b.clone(), e);
        }
    }
    internal.sort();
    internal.dedup();
    Ok(Decomposition {
        enc: *enc,
        internal,
        bodies,
        errors,
    })
}

fn parent_error(b: &Clause, known: &HashMap<Clause, f64>) -> Option<f64> {
    // smallest error among the bodies one literal shorter
    (0..b.len())
        .filter_map(|i| {
            let parent: Clause = b
                .literals()
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, l)| *l)
                .collect();
            known.get(&parent).copied()
        })
        .reduce(f64::min)
}

/// Where `v̂` draws its instances from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InstanceSource {
    /// Uniform samples; `None` takes the Hoeffding count.
    Random { samples: Option<usize> },
    /// The whole input space (exact expectations).
    Enumerate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VMode {
    Exact,
    Marginal,
}

/// Estimated local correlations.
#[derive(Clone, Debug)]
pub struct ValuationTable {
    pub mode: VMode,
    /// `|S^u|` per vertex.
    pub dims: Vec<usize>,
    /// Exact mode: one weight per tuple, row-major over `dims`.
    pub tuples: Option<Vec<f64>>,
    /// `v̂^u_S` per vertex and body.
    pub marginal: Vec<Vec<f64>>,
    pub samples: usize,
    /// Advertised additive accuracy `ε/|S|`.
    pub accuracy: f64,
}

impl ValuationTable {
    pub fn tuple(&self, idx: &[usize]) -> Option<f64> {
        let t = self.tuples.as_ref()?;
        let mut flat = 0usize;
        for (&i, &d) in idx.iter().zip(&self.dims) {
            flat = flat * d + i;
        }
        Some(t[flat])
    }
}

/// Hoeffding count for `k` means of `[-1, 1]` values, each within `t`
/// simultaneously with probability `1 - δ`.
pub fn hoeffding_samples(k: usize, t: f64, delta: f64) -> usize {
    (2.0 * (2.0 * k.max(1) as f64 / delta).ln() / (t * t)).ceil() as usize
}

fn sample_instances(
    n: usize,
    from: InstanceSource,
    hoeffding: usize,
    rng: &mut Rng,
) -> Vec<GraphInstance> {
    match from {
        InstanceSource::Enumerate => GraphInstance::enumerate(n).collect(),
        InstanceSource::Random { samples } => (0..samples.unwrap_or(hoeffding))
            .map(|_| GraphInstance::random(n, rng))
            .collect(),
    }
}

/// Indices of the bodies of vertex `u` that the first-round input satisfies.
fn satisfied(bodies: &[Clause], x: &Bits) -> Vec<usize> {
    bodies
        .iter()
        .enumerate()
        .filter(|(_, b)| b.eval(x))
        .map(|(i, _)| i)
        .collect()
}

/// Local correlation estimates. Bodies are evaluated on the first-round input
/// `enc(u, G, Init)`; each sample contributes `2ν − 1`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_v(
    dec: &Decomposition,
    source: &dyn SourceModel,
    eps: f64,
    delta: f64,
    from: InstanceSource,
    mode: VMode,
    tuple_cap: usize,
    rng: &mut Rng,
) -> Result<ValuationTable> {
    let enc = dec.enc;
    let dims: Vec<usize> = dec.bodies.iter().map(Vec::len).collect();
    let total = dec.total().max(1);
    let accuracy = eps / total as f64;
    let cells = dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d));
    let k = match mode {
        VMode::Exact => match cells {
            Some(c) if c <= tuple_cap => c,
            _ => {
                return Err(Error::Resource(format!(
                    "exact valuation table has {dims:?} cells, cap is {tuple_cap}"
                )))
            }
        },
        VMode::Marginal => dims.iter().sum(),
    };
    let insts = sample_instances(enc.n, from, hoeffding_samples(k, accuracy, delta), rng);
    if insts.is_empty() {
        return Err(Error::Invalid("no instances to estimate from".into()));
    }
    let labels = source.predict_batch(&insts);
    let mut marginal: Vec<Vec<f64>> = dims.iter().map(|&d| vec![0.0; d]).collect();
    let mut tuples = (mode == VMode::Exact).then(|| vec![0.0; k]);
    let mut hits: Vec<Vec<usize>> = vec![Vec::new(); enc.n];
    for (g, &nu) in insts.iter().zip(&labels) {
        let sign = if nu { 1.0 } else { -1.0 };
        for u in 0..enc.n {
            hits[u] = satisfied(&dec.bodies[u], &enc.encode(u, g, g.init));
            for &i in &hits[u] {
                marginal[u][i] += sign;
            }
        }
        if let Some(t) = tuples.as_mut() {
            add_product(t, &dims, &hits, sign);
        }
    }
    let scale = 1.0 / insts.len() as f64;
    marginal.iter_mut().flatten().for_each(|v| *v *= scale);
    if let Some(t) = tuples.as_mut() {
        t.iter_mut().for_each(|v| *v *= scale);
    }
    Ok(ValuationTable {
        mode,
        dims,
        tuples,
        marginal,
        samples: insts.len(),
        accuracy,
    })
}

fn add_product(table: &mut [f64], dims: &[usize], hits: &[Vec<usize>], sign: f64) {
    fn go(
        table: &mut [f64],
        dims: &[usize],
        hits: &[Vec<usize>],
        u: usize,
        flat: usize,
        sign: f64,
    ) {
        if u == dims.len() {
            table[flat] += sign;
            return;
        }
        for &i in &hits[u] {
            go(table, dims, hits, u + 1, flat * dims[u] + i, sign);
        }
    }
    go(table, dims, hits, 0, 0, sign)
}

/// Leaf-tuple valuation `Σ (2 T̃(S_1..S_n) − 1) u_{S_1..S_n}` over leaf tuples.
///
/// Round-1 states come from the leaf labels. Later rounds are evaluated only
/// from what the cell fixes (its literals and the seeded states); if some
/// vertex reads an unfixed bit the value is undefined for this cell shape.
/// Cells whose literals contradict each other have probability zero and
/// contribute nothing.
pub fn valuation(
    trees: &[DecisionTree],
    table: &ValuationTable,
    dec: &Decomposition,
    l: usize,
) -> Result<f64> {
    let enc = dec.enc;
    let n = enc.n;
    if trees.len() != n {
        return Err(Error::Dimension(format!("{} trees for n={n}", trees.len())));
    }
    if table.tuples.is_none() {
        return Err(Error::Invalid("valuation needs an exact-mode table".into()));
    }
    let leaves: Vec<Vec<(usize, Clause, bool)>> = trees
        .iter()
        .enumerate()
        .map(|(u, t)| {
            t.leaf_paths()
                .into_iter()
                .map(|(c, lab)| {
                    let body = c.canonical();
                    dec.index_of(u, &body)
                        .map(|i| (i, body.clone(), lab))
                        .ok_or_else(|| {
                            Error::Invalid(format!("leaf {body} of vertex {u} is not in the pool"))
                        })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let mut total = 0.0;
    let mut idx = vec![0usize; n];
    let mut choice = vec![0usize; n];
    loop {
        let cell: Vec<&(usize, Clause, bool)> = (0..n).map(|u| &leaves[u][choice[u]]).collect();
        for u in 0..n {
            idx[u] = cell[u].0;
        }
        let w = table.tuple(&idx).expect("exact table present");
        if w != 0.0 {
            if let Some(out) = cell_output(&cell, trees, &enc, l)? {
                total += if out { w } else { -w };
            }
        }
        // odometer over leaf choices
        let mut u = 0;
        loop {
            if u == n {
                return Ok(total);
            }
            choice[u] += 1;
            if choice[u] < leaves[u].len() {
                break;
            }
            choice[u] = 0;
            u += 1;
        }
    }
}

/// Output of the model inside one leaf cell; `None` for an empty cell.
fn cell_output(
    cell: &[&(usize, Clause, bool)],
    trees: &[DecisionTree],
    enc: &InputEncoding,
    l: usize,
) -> Result<Option<bool>> {
    let n = enc.n;
    let mut fixed: HashMap<usize, bool> = HashMap::new();
    for (_, body, _) in cell {
        for &Literal { var, positive } in body.literals() {
            if *fixed.entry(var as usize).or_insert(positive) != positive {
                return Ok(None);
            }
        }
    }
    if l == 0 {
        return Err(Error::UndefinedValuation(
            "no rounds to seed from leaf labels".into(),
        ));
    }
    let mut h: Vec<bool> = cell.iter().map(|c| c.2).collect();
    for round in 2..=l {
        let prev = h.clone();
        for (v, t) in trees.iter().enumerate() {
            let known = |var: usize| match enc.kind(var) {
                VarKind::Dp(u) => Some(prev[u]),
                VarKind::Edge(_) => fixed.get(&var).copied(),
                VarKind::Id(_) => None,
            };
            h[v] = t.eval_partial(known).ok_or_else(|| {
                Error::UndefinedValuation(format!(
                    "vertex {v} reads a bit its cell leaves free in round {round}"
                ))
            })?;
        }
    }
    Ok(Some(h[n - 1]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boolean_dt::selector_path;

    #[test]
    fn decomposition_examples() {
        let enc = InputEncoding::new(2).unwrap();
        let p1 = selector_path(&enc, 1);
        let clauses = vec![
            selector_path(&enc, 0),
            p1.clone(),
            p1.extended(Literal::pos(enc.dp_var(0))),
        ];
        let dec = decompose_clauses(&clauses, &enc, |_| Some(0.0)).unwrap();
        assert!(dec.internal.iter().all(Clause::is_empty));
        assert_eq!(dec.bodies[0], vec![Clause::empty()]);
        assert_eq!(
            dec.bodies[1],
            vec![
                Clause::empty(),
                Clause::new(vec![Literal::pos(enc.dp_var(0))])
            ]
        );
        assert_eq!(dec.total(), clauses.len());
    }

    #[test]
    fn corrupt_prefix_is_rejected() {
        let enc = InputEncoding::new(4).unwrap();
        let bad = Clause::new(vec![Literal::pos(1), Literal::pos(enc.dp_var(0))]);
        assert!(matches!(
            decompose_clauses(&[bad], &enc, |_| None),
            Err(Error::PoolCorruption(_))
        ));
    }

    #[test]
    fn children_inherit_parent_error() {
        let enc = InputEncoding::new(2).unwrap();
        let p = selector_path(&enc, 1);
        let child = p.extended(Literal::neg(enc.dp_var(1)));
        let dec = decompose_clauses(&[p.clone(), child.clone()], &enc, |c| {
            (c == &p).then_some(0.25)
        })
        .unwrap();
        assert_eq!(dec.error_of(1, &body_of(&child, &enc)), 0.25);
    }

    #[test]
    fn hoeffding_count() {
        assert_eq!(
            hoeffding_samples(1, 0.1, 0.05),
            (2.0 * 40f64.ln() / 0.01).ceil() as usize
        );
    }
}
