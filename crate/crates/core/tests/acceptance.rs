//! Acceptance criteria. Runs as a plain binary so every verdict line is
//! printed; exits non-zero if any criterion fails. Pass criterion numbers
//! as arguments to run a subset.

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;

use lidistill::boolean_dt::{random_tree, selector_path, Clause, DecisionTree, Literal, Node};
use lidistill::distiller::{
    decompose_clauses, estimate_v, tree_dp_single, valuation, InstanceSource, Phase1Mode, Phase2Mode, VMode,
};
use lidistill::harness::{run_e2e_table, run_lrh_table, Backend, ExperimentConfig, Table};
use lidistill::local_iter::{
    build_two_reachability_model, dependency_set, feature_value, random_model, GraphInstance, InputBit,
    InputEncoding, LocalIterationModel,
};
use lidistill::probe::{linear_probe, ProbeConfig, SampleCount};
use lidistill::rng;
use lidistill::separation::{count_negatives, enumerate_restricted_family, leaf_lower_bound, min_leaves_restricted};
use lidistill::source::{build_oracle_source, OracleSpec, SourceModel};

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn e<E: std::fmt::Display>(err: E) -> String {
    err.to_string()
}

static OUT: OnceLock<PathBuf> = OnceLock::new();

fn out_dir(name: &str) -> PathBuf {
    OUT.get().expect("output root is set in main").join(name)
}

/// Direct simulation of `A^l[AND_S]`: every vertex applies the conjunction
/// to its own input for `l` rounds; the last vertex's bit is returned.
fn conjunction_run(s: &Clause, g: &GraphInstance, l: usize) -> bool {
    let enc = InputEncoding::new(g.n).unwrap();
    let mut h = g.init;
    for _ in 0..l {
        let mut next = 0u64;
        for v in 0..g.n {
            if s.eval(&enc.encode(v, g, h)) {
                next |= 1 << v;
            }
        }
        h = next;
    }
    (h >> (g.n - 1)) & 1 == 1
}

fn random_clause(enc: &InputEncoding, len: usize, r: &mut rng::Rng) -> Clause {
    let mut vars: Vec<usize> = (0..enc.d).collect();
    vars.shuffle(r);
    Clause::new(vars[..len.min(enc.d)].iter().map(|&v| Literal::new(v, r.gen())).collect())
}

fn criterion_1() -> Check {
    let mut r = rng::seeded(11);
    let mut flips = 0usize;
    for _ in 0..200 {
        let n = r.gen_range(2..=4);
        let l = r.gen_range(1..=4);
        let enc = InputEncoding::new(n).map_err(e)?;
        let len = r.gen_range(0..=4);
        let s = random_clause(&enc, len, &mut r);
        let dep = dependency_set(&s, l, n);
        let outside: Vec<usize> = (0..GraphInstance::input_bits(n))
            .filter(|&p| !dep.contains(&InputBit::from_position(p, n)))
            .collect();
        for g in GraphInstance::enumerate(n) {
            let f = feature_value(&s, &g, l, n);
            ensure(f == conjunction_run(&s, &g, l), || format!("feature_value disagrees with simulation for {s}"))?;
            for &p in &outside {
                let h = GraphInstance::from_index(n, g.index() ^ (1 << p));
                ensure(feature_value(&s, &h, l, n) == f, || format!("{s} (n={n}, l={l}) depends on bit {p}"))?;
                flips += 1;
            }
        }
    }
    Ok(format!("200 clauses, {flips} bit flips outside the dependency sets, all constant"))
}

/// Every clause of length at most `len` over `vars`, canonical.
fn all_bodies(vars: &[usize], len: usize) -> Vec<Clause> {
    let mut out = vec![Clause::empty()];
    let mut frontier = vec![Clause::empty()];
    for _ in 0..len {
        let mut next = HashSet::new();
        for c in &frontier {
            for &v in vars.iter().filter(|&&v| !c.contains_var(v)) {
                for pos in [false, true] {
                    next.insert(c.extended(Literal::new(v, pos)).canonical());
                }
            }
        }
        let mut next: Vec<Clause> = next.into_iter().collect();
        next.sort();
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

fn vertex_pool(enc: &InputEncoding, bodies: &[Clause]) -> Vec<Clause> {
    (0..enc.n)
        .flat_map(|u| {
            let sel = selector_path(enc, u);
            bodies.iter().map(move |b| {
                let mut lits = sel.literals().to_vec();
                lits.extend_from_slice(b.literals());
                Clause::new(lits)
            })
        })
        .collect()
}

fn criterion_2() -> Check {
    let (n, l) = (2, 1);
    let enc = InputEncoding::new(n).map_err(e)?;
    let vars = enc.body_vars();
    let pool = vertex_pool(&enc, &all_bodies(&vars, 2));
    let dec = decompose_clauses(&pool, &enc, |_| Some(0.0)).map_err(e)?;
    let mut r = rng::seeded(22);
    let truth = random_model(n, l, 1, &mut r).map_err(e)?;
    let src = build_oracle_source(OracleSpec::new(truth)).map_err(e)?;
    let table = estimate_v(&dec, &src, 1.0, 0.05, InstanceSource::Enumerate, VMode::Exact, 1 << 20, &mut r).map_err(e)?;
    let insts: Vec<GraphInstance> = GraphInstance::enumerate(n).collect();
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let trees = (0..n)
            .map(|_| random_tree(r.gen_range(0..=2), &vars, &mut r))
            .collect::<lidistill::Result<Vec<_>>>()
            .map_err(e)?;
        let val = valuation(&trees, &table, &dec, l).map_err(e)?;
        let model = LocalIterationModel::new(n, l, trees).map_err(e)?;
        let sign = |b: bool| if b { 1.0 } else { -1.0 };
        let expect = insts.iter().map(|g| sign(src.predict(g)) * sign(model.output(g))).sum::<f64>() / insts.len() as f64;
        worst = worst.max((val - expect).abs());
    }
    ensure(worst <= 1e-12, || format!("max deviation {worst:e} > 1e-12"))?;
    Ok(format!("50 candidates, max |val - E[(2nu-1)(2A-1)]| = {worst:.1e}"))
}

/// Best labelled tree value by explicit enumeration of every pool tree.
fn exhaustive_best(c: &Clause, budget: usize, depth_left: usize, pool: &HashSet<Clause>, vars: &[usize], w: &dyn Fn(&Clause) -> f64) -> f64 {
    // both labels of the leaf
    let mut best = w(c).max(-w(c));
    if budget >= 3 && depth_left > 0 {
        for &v in vars.iter().filter(|&&v| !c.contains_var(v)) {
            let lo = c.extended(Literal::neg(v)).canonical();
            let hi = c.extended(Literal::pos(v)).canonical();
            if !pool.contains(&lo) || !pool.contains(&hi) {
                continue;
            }
            for left in (1..budget - 1).step_by(2) {
                let right = budget - 1 - left;
                let a = exhaustive_best(&lo, left, depth_left - 1, pool, vars, w);
                let b = exhaustive_best(&hi, right, depth_left - 1, pool, vars, w);
                best = best.max(a + b);
            }
        }
    }
    best
}

/// Value, size and depth of a tree, walked from its node arena.
fn walk(t: &DecisionTree, i: usize, c: Clause, w: &dyn Fn(&Clause) -> f64) -> (f64, usize, usize) {
    match t.nodes()[i] {
        Node::Leaf(b) => (if b { w(&c) } else { -w(&c) }, 1, 0),
        Node::Split { var, lo, hi } => {
            let (a, sa, da) = walk(t, lo as usize, c.extended(Literal::neg(var as usize)).canonical(), w);
            let (b, sb, db) = walk(t, hi as usize, c.extended(Literal::pos(var as usize)).canonical(), w);
            (a + b, 1 + sa + sb, 1 + da.max(db))
        }
    }
}

fn criterion_3() -> Check {
    let mut r = rng::seeded(33);
    let vars: Vec<usize> = (0..4).collect();
    let mut trees_checked = 0;
    for _ in 0..100 {
        // random pool closed under dropping literals
        let mut pool: HashSet<Clause> = HashSet::from([Clause::empty()]);
        for c in all_bodies(&vars, 2).into_iter().filter(|c| !c.is_empty()) {
            let closed = (0..c.len()).all(|i| pool.contains(&c.filtered(|l| *l != c.literals()[i])));
            if closed && r.gen_bool(if c.len() == 1 { 0.8 } else { 0.6 }) {
                pool.insert(c);
            }
        }
        let list: Vec<Clause> = pool.iter().cloned().collect();
        let weights: Vec<f64> = list.iter().map(|_| r.gen_range(-1.0..1.0)).collect();
        let wmap: std::collections::HashMap<Clause, f64> = list.iter().cloned().zip(weights.iter().copied()).collect();
        let w = |c: &Clause| wmap[c];
        let s = [1usize, 3, 5, 7][r.gen_range(0..4)];
        let dp = tree_dp_single(&list, &weights, s, 2).map_err(e)?;
        let best = exhaustive_best(&Clause::empty(), s, 2, &pool, &vars, &w);
        let (own, size, depth) = walk(&dp.tree, 0, Clause::empty(), &w);
        ensure((dp.value - best).abs() <= 1e-12, || format!("dp {} vs exhaustive {best}", dp.value))?;
        ensure((own - best).abs() <= 1e-12, || format!("returned tree is worth {own}, optimum {best}"))?;
        ensure(size <= s && depth <= 2, || format!("tree of size {size}, depth {depth} exceeds bounds"))?;
        trees_checked += 1;
    }
    Ok(format!("{trees_checked} weightings, DP value and tree match exhaustive search exactly"))
}

fn oracle_e2e_config(dir: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        n: 4,
        l: 2,
        depths: vec![2],
        seeds: 20,
        backend: Backend::Oracle,
        out_dir: dir.to_path_buf(),
        ..ExperimentConfig::default()
    };
    cfg.distill.phase1 = Phase1Mode::Exact;
    cfg.distill.phase2 = Phase2Mode::Shortlist;
    cfg.distill.probe = ProbeConfig { tau: 1.0, samples: SampleCount::Fixed(512), ..ProbeConfig::default() };
    cfg.distill.v_source = InstanceSource::Random { samples: Some(4096) };
    cfg
}

fn column_f64(t: &Table, row: usize, col: &str) -> Option<f64> {
    t.get(row, col)?.parse().ok()
}

fn criterion_4() -> Check {
    let t = run_e2e_table(&oracle_e2e_config(&out_dir("c4"))).map_err(e)?;
    let exact = (0..t.rows.len()).filter(|&i| column_f64(&t, i, "truth_acc") == Some(1.0)).count();
    let detail = format!("{exact}/20 seeds agree with the truth on all 2^10 inputs");
    ensure(exact >= 19 && t.rows.len() == 20, || detail.clone())?;
    Ok(detail)
}

/// Unconstrained least-squares risk over the whole input space.
fn exact_min_risk(src: &dyn SourceModel, f: impl Fn(&GraphInstance) -> bool) -> f64 {
    let insts: Vec<GraphInstance> = GraphInstance::enumerate(src.n()).collect();
    let m = src.dim();
    let phi = DMatrix::from_fn(insts.len(), m, |i, j| src.latent(&insts[i])[j]);
    let y = DVector::from_iterator(insts.len(), insts.iter().map(|g| f(g) as u8 as f64));
    let w = phi.clone().svd(true, true).solve(&y, 1e-12).expect("svd solve");
    (phi * w - &y).norm_squared() / insts.len() as f64
}

fn criterion_5() -> Check {
    let (n, l) = (3, 1);
    let truth = random_model(n, l, 1, &mut rng::seeded(55)).map_err(e)?;
    let src = build_oracle_source(OracleSpec::new(truth)).map_err(e)?;
    let enc = InputEncoding::new(n).map_err(e)?;
    let planted = src.planted().iter().max_by_key(|c| c.len()).cloned().ok_or("no planted clause")?;
    let planted_set: HashSet<Clause> = src.planted().iter().map(Clause::canonical).collect();
    let cfg = ProbeConfig { tau: 1.0, eps: 0.05, delta: 0.1, samples: SampleCount::Fixed(2000), ..ProbeConfig::default() };
    // first unplanted conjunction whose best linear readout is worse than 2 eps
    let (reject, risk) = all_bodies(&(0..enc.d).collect::<Vec<_>>(), 2)
        .into_iter()
        .filter(|c| c.len() == 2 && !planted_set.contains(c))
        .map(|c| {
            let risk = exact_min_risk(&src, |g| feature_value(&c, g, l, n));
            (c, risk)
        })
        .find(|(_, risk)| *risk > 2.0 * cfg.eps)
        .ok_or("no conjunction with min risk above 2 eps")?;
    let mut accepted = 0;
    let mut rejected = 0;
    for t in 0..100u64 {
        let a = linear_probe(&|g| feature_value(&planted, g, l, n), &src, &cfg, &mut rng::fork(t, 1)).map_err(e)?;
        let b = linear_probe(&|g| feature_value(&reject, g, l, n), &src, &cfg, &mut rng::fork(t, 2)).map_err(e)?;
        accepted += a.accepted as usize;
        rejected += !b.accepted as usize;
    }
    let detail = format!("planted {planted} accepted {accepted}/100; {reject} (min risk {risk:.3}) rejected {rejected}/100");
    ensure(accepted >= 90 && rejected >= 90, || detail.clone())?;
    Ok(detail)
}

fn criterion_6() -> Check {
    let (n, l) = (2, 1);
    let enc = InputEncoding::new(n).map_err(e)?;
    let pool = vertex_pool(&enc, &all_bodies(&enc.body_vars(), 1));
    let dec = decompose_clauses(&pool, &enc, |_| Some(0.0)).map_err(e)?;
    let truth = random_model(n, l, 1, &mut rng::seeded(66)).map_err(e)?;
    let src = build_oracle_source(OracleSpec::new(truth)).map_err(e)?;
    let (eps, delta) = (1.0, 0.05);
    let exact = estimate_v(&dec, &src, eps, delta, InstanceSource::Enumerate, VMode::Exact, 1 << 20, &mut rng::seeded(0))
        .map_err(e)?;
    let exact_t = exact.tuples.clone().ok_or("no tuple table")?;
    let mut within = 0;
    let mut samples = 0;
    for seed in 0..100u64 {
        let est = estimate_v(&dec, &src, eps, delta, InstanceSource::Random { samples: None }, VMode::Exact, 1 << 20, &mut rng::fork(seed, 6))
            .map_err(e)?;
        samples = est.samples;
        let t = est.tuples.as_ref().ok_or("no tuple table")?;
        let dev = t.iter().zip(&exact_t).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        within += (dev <= est.accuracy) as usize;
    }
    let detail = format!("{within}/100 runs within eps/|S| = {:.4} ({samples} samples each)", exact.accuracy);
    ensure(within >= 95, || detail.clone())?;
    Ok(detail)
}

fn criterion_7() -> Check {
    for (n, neg, total) in [(4, 9u64, 32u64), (5, 27, 128), (6, 81, 512)] {
        let got = count_negatives(n).map_err(e)?;
        ensure(got == (neg, total), || format!("n={n}: {got:?}, want ({neg}, {total})"))?;
    }
    let mut leaves = Vec::new();
    for n in 3..=6 {
        let (m, witness) = min_leaves_restricted(n).map_err(e)?;
        ensure(m >= leaf_lower_bound(n), || format!("n={n}: {m} leaves below the bound {}", leaf_lower_bound(n)))?;
        for inst in enumerate_restricted_family(n).map_err(e)? {
            let x = lidistill::bits::Bits::from_word(inst.bits as u128, 2 * (n - 2) + 1).map_err(e)?;
            let g = inst.to_graph();
            let direct = inst.bit(0) || (1..n - 1).any(|v| inst.bit(2 * (v - 1) + 1) && inst.bit(2 * (v - 1) + 2));
            ensure(witness.eval(&x) == direct, || format!("n={n}: witness tree wrong on {:b}", inst.bits))?;
            ensure(g.n == n, || "family member has the wrong size".into())?;
        }
        leaves.push(m);
    }
    for n in 3..=7 {
        let model = build_two_reachability_model(n).map_err(e)?;
        let enc = InputEncoding::new(n).map_err(e)?;
        for inst in enumerate_restricted_family(n).map_err(e)? {
            let g = inst.to_graph();
            let brute = g.has_edge(&enc, 0, n - 1) || (1..n - 1).any(|v| g.has_edge(&enc, 0, v) && g.has_edge(&enc, v, n - 1));
            ensure(model.output(&g) == brute, || format!("n={n}: evaluator wrong on {:b}", inst.bits))?;
        }
    }
    Ok(format!("negatives 9/32, 27/128, 81/512; min leaves n=3..6 {leaves:?} >= bounds; evaluator exact for n=3..7"))
}

fn trained_config(dir: &Path) -> ExperimentConfig {
    ExperimentConfig {
        n: 6,
        l: 6,
        depths: vec![2],
        ks: vec![10],
        backend: Backend::Mlp,
        seeds: 3,
        out_dir: dir.to_path_buf(),
        ..ExperimentConfig::default()
    }
}

fn criterion_8() -> Check {
    let t = run_e2e_table(&trained_config(&out_dir("trained"))).map_err(e)?;
    let rows = t.rows.len() as f64;
    let mean = |col: &str| (0..t.rows.len()).map(|i| column_f64(&t, i, col).unwrap_or(0.0)).sum::<f64>() / rows;
    let (src, dist) = (mean("source_acc"), mean("distill_acc"));
    let detail = format!("source acc {src:.3}, distillation agreement {dist:.3} over 3 seeds (reference 0.754)");
    ensure(src >= 0.95 && dist >= 0.66, || detail.clone())?;
    Ok(detail)
}

fn criterion_9() -> Check {
    let oracle = ExperimentConfig {
        n: 6,
        l: 6,
        depths: vec![2, 3, 4, 5],
        backend: Backend::Oracle,
        out_dir: out_dir("lrh-oracle"),
        ..ExperimentConfig::default()
    };
    let t = run_lrh_table(&oracle).map_err(e)?.summary;
    let mut worst = 0.0f64;
    for i in (0..t.rows.len()).filter(|&i| t.get(i, "norm") == Some("inf")) {
        for col in ["avg_train_err", "avg_test_err"] {
            worst = worst.max(column_f64(&t, i, col).ok_or("unparsable error")?);
        }
    }
    ensure(worst <= 1e-6, || format!("oracle unconstrained error {worst:e} > 1e-6"))?;
    let trained = ExperimentConfig { depths: vec![2, 3], seeds: 1, ..trained_config(&out_dir("trained")) };
    let t = run_lrh_table(&trained).map_err(e)?.summary;
    let mut report = Vec::new();
    for &d in &trained.depths {
        let row = |norm: &str| (0..t.rows.len()).find(|&i| t.get(i, "depth") == Some(&d.to_string()) && t.get(i, "norm") == Some(norm));
        let (u, c) = (row("inf").ok_or("missing row")?, row("0.001").ok_or("missing row")?);
        for col in ["avg_train_err", "avg_test_err"] {
            let (a, b) = (column_f64(&t, u, col).unwrap_or(f64::NAN), column_f64(&t, c, col).unwrap_or(f64::NAN));
            ensure(a <= b, || format!("depth {d}: unconstrained {col} {a} > constrained {b}"))?;
        }
        report.push(format!(
            "depth {d}: acc {} err {} vs {}",
            t.get(u, "source_acc").unwrap_or("?"),
            t.get(u, "avg_test_err").unwrap_or("?"),
            t.get(c, "avg_test_err").unwrap_or("?")
        ));
    }
    Ok(format!("oracle max unconstrained error {worst:.1e}; trained {}", report.join("; ")))
}

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        return;
    }
    let only: Vec<u32> = args.iter().filter_map(|a| a.parse().ok()).collect();
    let root = tempfile::tempdir().expect("temporary output directory");
    OUT.set(root.path().to_path_buf()).expect("set once");
    let criteria: [(u32, &str, fn() -> Check); 9] = [
        (1, "junta property", criterion_1),
        (2, "valuation identity", criterion_2),
        (3, "DP optimality", criterion_3),
        (4, "oracle end-to-end recovery", criterion_4),
        (5, "LinearProbe calibration", criterion_5),
        (6, "Hoeffding accuracy", criterion_6),
        (7, "separation counts", criterion_7),
        (8, "trained end-to-end", criterion_8),
        (9, "LRH table shape", criterion_9),
    ];
    let mut failed = 0;
    for (id, name, run) in criteria {
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        let t0 = Instant::now();
        let verdict = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let secs = t0.elapsed().as_secs_f64();
        match verdict {
            Ok(detail) => println!("criterion {id} ({name}): PASS  {detail}  [{secs:.1}s]"),
            Err(detail) => {
                failed += 1;
                println!("criterion {id} ({name}): FAIL  {detail}  [{secs:.1}s]");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
