use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;

use crate::boolean_dt::{selector_prefixes, Clause, Literal};
use crate::error::{Error, Result};
use crate::local_iter::{CompiledFeature, InputEncoding, VarKind};
use crate::probe::{linear_probe, LatentBank, ProbeConfig, ProbeOutcome};
use crate::rng;
use crate::source::SourceModel;

/// Phase-1 output: survivors per depth with their probe outcomes.
#[derive(Clone, Debug)]
pub struct PathPool {
    pub enc: InputEncoding,
    pub l: usize,
    /// `S_0 .. S_R`, canonical clauses in sorted order.
    pub levels: Vec<Vec<Clause>>,
    pub records: HashMap<Clause, ProbeOutcome>,
    pub probes: usize,
    /// Probes a run without any pruning would issue.
    pub exhaustive_probes: Option<u128>,
}

impl PathPool {
    fn new(enc: InputEncoding, l: usize) -> Self {
        PathPool {
            enc,
            l,
            levels: Vec::new(),
            records: HashMap::new(),
            probes: 0,
            exhaustive_probes: None,
        }
    }

    /// Every clause of every level, without repeats.
    pub fn union(&self) -> Vec<Clause> {
        let mut all: Vec<Clause> = self.levels.iter().flatten().cloned().collect();
        all.sort();
        all.dedup();
        all
    }

    pub fn contains(&self, c: &Clause) -> bool {
        let c = c.canonical();
        self.levels.iter().any(|lv| lv.binary_search(&c).is_ok())
    }

    /// `|S_i|` per depth.
    pub fn sizes(&self) -> Vec<usize> {
        self.levels.iter().map(Vec::len).collect()
    }

    pub fn probe_fraction(&self) -> Option<f64> {
        self.exhaustive_probes
            .filter(|&e| e > 0)
            .map(|e| self.probes as f64 / e as f64)
    }
}

/// Phase 1 stopped early; the pool collected so far is kept.
#[derive(Debug)]
pub struct PartialPool {
    pub error: Error,
    pub pool: PathPool,
}

impl From<PartialPool> for Error {
    fn from(p: PartialPool) -> Error {
        p.error
    }
}

pub type PoolResult = std::result::Result<PathPool, PartialPool>;

/// `S_0`: selector prefixes reaching a real vertex, then the full paths.
pub fn initial_level(enc: &InputEncoding) -> Vec<Clause> {
    let (internal, full) = selector_prefixes(enc);
    let mut s0: Vec<Clause> = internal
        .into_iter()
        .chain(full)
        .map(|c| c.canonical())
        .collect();
    s0.sort();
    s0.dedup();
    s0
}

/// Vertex whose full selector path starts `c`, if any.
pub fn vertex_of(c: &Clause, enc: &InputEncoding) -> Option<usize> {
    let ids: Vec<&Literal> = c
        .literals()
        .iter()
        .filter(|l| matches!(enc.kind(l.var()), VarKind::Id(_)))
        .collect();
    if ids.len() != enc.id_bits
        || ids
            .iter()
            .enumerate()
            .any(|(j, l)| l.var() != enc.id_var(j))
    {
        return None;
    }
    let u = ids
        .iter()
        .fold(0usize, |acc, l| (acc << 1) | l.positive as usize);
    (u < enc.n).then_some(u)
}

/// Children of a survivor: one more body literal, either polarity, on a
/// variable not yet used. Selector-internal prefixes are not extended.
fn extensions(c: &Clause, enc: &InputEncoding) -> Vec<Clause> {
    if vertex_of(c, enc).is_none() {
        return Vec::new();
    }
    let mut out = Vec::new();
    for var in enc.body_vars() {
        if !c.contains_var(var) {
            out.push(c.extended(Literal::neg(var)));
            out.push(c.extended(Literal::pos(var)));
        }
    }
    out
}

fn next_level(parents: &[&Clause], enc: &InputEncoding, cap: usize) -> Result<Vec<Clause>> {
    let mut next: Vec<Clause> = parents.iter().flat_map(|c| extensions(c, enc)).collect();
    next.sort();
    next.dedup();
    if next.len() > cap {
        return Err(Error::Resource(format!(
            "pool level of {} clauses exceeds the cap of {cap}",
            next.len()
        )));
    }
    Ok(next)
}

/// Tolerance for depth `i`: `2^(-i l - 3)`.
pub fn eps_schedule(i: usize, l: usize) -> f64 {
    2f64.powi(-((i * l + 3) as i32))
}

fn clause_tag(c: &Clause, depth: usize) -> u64 {
    let mut bytes = depth.to_le_bytes().to_vec();
    for lit in c.literals() {
        bytes.extend_from_slice(&lit.var.to_le_bytes());
        bytes.push(lit.positive as u8);
    }
    rng::tag_of(&bytes)
}

/// Phase 1 with the exact tolerance schedule. Every probe draws its
/// own samples from a stream forked from `(seed, clause)`.
pub fn phase1_exact(
    source: &dyn SourceModel,
    r: usize,
    l: usize,
    delta: f64,
    probe: &ProbeConfig,
    pool_cap: usize,
    seed: u64,
) -> PoolResult {
    let enc = match InputEncoding::new(source.n()) {
        Ok(e) => e,
        Err(error) => {
            return Err(PartialPool {
                error,
                pool: PathPool::new(InputEncoding::new(1).unwrap(), l),
            })
        }
    };
    let mut pool = PathPool::new(enc, l);
    if r == 0 {
        pool.levels.push(initial_level(&enc));
        return Ok(pool);
    }
    pool.levels.push(initial_level(&enc));
    for i in 1..=r {
        let current = &pool.levels[i - 1];
        let cfg = ProbeConfig {
            eps: eps_schedule(i, l),
            delta: delta / (2.0 * current.len().max(1) as f64 * r as f64),
            ..probe.clone()
        };
        let outcomes: Result<Vec<ProbeOutcome>> = current
            .par_iter()
            .map(|c| {
                let mut rng = rng::fork(seed, clause_tag(c, i));
                let f = CompiledFeature::new(c, l, &enc);
                linear_probe(&|g| f.eval(g), source, &cfg, &mut rng)
            })
            .collect();
        let outcomes = match outcomes {
            Ok(o) => o,
            Err(error) => return Err(PartialPool { error, pool }),
        };
        pool.probes += outcomes.len();
        let survivors: Vec<&Clause> = current
            .iter()
            .zip(&outcomes)
            .filter(|(_, o)| o.accepted)
            .map(|(c, _)| c)
            .collect();
        let next = next_level(&survivors, &enc, pool_cap);
        for (c, o) in current.iter().zip(outcomes) {
            pool.records.insert(c.clone(), o);
        }
        match next {
            Ok(next) => pool.levels.push(next),
            Err(error) => return Err(PartialPool { error, pool }),
        }
    }
    pool.exhaustive_probes = Some(exhaustive_probe_count(&enc, r));
    Ok(pool)
}

/// Practical Phase 1: probes on a shared validation bank and branches only
/// from the `k` lowest-error clauses of each vertex subtree.
pub fn phase1_topk(
    source: &dyn SourceModel,
    r: usize,
    l: usize,
    k: usize,
    bank: &LatentBank,
    probe: &ProbeConfig,
    pool_cap: usize,
) -> PoolResult {
    let enc = InputEncoding::new(source.n()).expect("source reports a valid vertex count");
    let mut pool = PathPool::new(enc, l);
    pool.levels.push(initial_level(&enc));
    if k == 0 {
        return Err(PartialPool {
            error: Error::Invalid("top-k needs k >= 1".into()),
            pool,
        });
    }
    for i in 1..=r {
        let current = &pool.levels[i - 1];
        let cfg = ProbeConfig {
            eps: eps_schedule(i, l),
            ..probe.clone()
        };
        let outcomes: Result<Vec<ProbeOutcome>> = current
            .par_iter()
            .map(|c| bank.probe_clause(c, l, &cfg))
            .collect();
        let outcomes = match outcomes {
            Ok(o) => o,
            Err(error) => return Err(PartialPool { error, pool }),
        };
        pool.probes += outcomes.len();
        let mut by_vertex: BTreeMap<usize, Vec<(f64, &Clause)>> = BTreeMap::new();
        for (c, o) in current.iter().zip(&outcomes) {
            if let Some(u) = vertex_of(c, &enc) {
                by_vertex.entry(u).or_default().push((o.test_risk, c));
            }
        }
        let mut keep = Vec::new();
        for group in by_vertex.values_mut() {
            group.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)));
            keep.extend(group.iter().take(k).map(|(_, c)| *c));
        }
        let next = next_level(&keep, &enc, pool_cap);
        for (c, o) in current.iter().zip(outcomes) {
            pool.records.insert(c.clone(), o);
        }
        match next {
            Ok(next) => pool.levels.push(next),
            Err(error) => return Err(PartialPool { error, pool }),
        }
    }
    pool.exhaustive_probes = Some(exhaustive_probe_count(&enc, r));
    Ok(pool)
}

/// Probes issued when nothing is pruned: `|S_0|` plus, for each depth
/// `i < R`, every body of length `i` under every vertex.
pub fn exhaustive_probe_count(enc: &InputEncoding, r: usize) -> u128 {
    let b = enc.body_vars().len() as u128;
    let mut total = if r > 0 {
        initial_level(enc).len() as u128
    } else {
        0
    };
    let mut bodies = 1u128;
    for i in 1..r as u128 {
        // C(b, i) 2^i, built incrementally
        bodies = bodies * (b + 1).saturating_sub(i) / i * 2;
        total += enc.n as u128 * bodies;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exhaustive_count_matches_expansion() {
        for n in 1..=5 {
            let enc = InputEncoding::new(n).unwrap();
            for r in 0..=3 {
                let mut levels = vec![initial_level(&enc)];
                let mut probes = 0u128;
                for _ in 1..=r {
                    let cur = levels.last().unwrap();
                    probes += cur.len() as u128;
                    let refs: Vec<&Clause> = cur.iter().collect();
                    levels.push(next_level(&refs, &enc, usize::MAX).unwrap());
                }
                assert_eq!(exhaustive_probe_count(&enc, r), probes, "n={n} r={r}");
            }
        }
    }

    #[test]
    fn vertex_of_full_paths() {
        let enc = InputEncoding::new(6).unwrap();
        let (internal, full) = selector_prefixes(&enc);
        assert!(internal.iter().all(|c| vertex_of(c, &enc).is_none()));
        for (u, c) in full.iter().enumerate() {
            assert_eq!(
                vertex_of(&c.extended(Literal::pos(enc.dp_var(1))), &enc),
                Some(u)
            );
        }
    }

    #[test]
    fn schedule() {
        assert_eq!(eps_schedule(1, 1), 1.0 / 16.0);
        assert_eq!(eps_schedule(2, 3), 2f64.powi(-9));
    }
}
