//! Property tests over the distiller and the experiment config.

use std::collections::{HashMap, HashSet};
use std::path::PathBuf;

use proptest::prelude::*;
use rand::Rng;

use lidistill::boolean_dt::{random_tree, selector_path, Clause, DecisionTree, Literal, Node};
use lidistill::distiller::{
    decompose_clauses, estimate_v, exact_joint_select, shortlist_select, tree_dp_single, valuation, AgreementBank,
    Decomposition, InstanceSource, ShortlistConfig, VMode, ValuationTable,
};
use lidistill::harness::{parse_config, render_config, Backend, ExperimentConfig};
use lidistill::local_iter::{random_model, GraphInstance, InputEncoding, LocalIterationModel};
use lidistill::probe::SampleCount;
use lidistill::rng;
use lidistill::source::{build_oracle_source, OracleSource, OracleSpec, SourceModel};

fn bodies(vars: &[usize], len: usize) -> Vec<Clause> {
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

/// Exact single-round setup on n=2: oracle source, full pool, exact table.
fn setup(seed: u64, body_len: usize) -> (OracleSource, Decomposition, ValuationTable) {
    let enc = InputEncoding::new(2).unwrap();
    let pool: Vec<Clause> = (0..2)
        .flat_map(|u| {
            let sel = selector_path(&enc, u);
            bodies(&enc.body_vars(), body_len).into_iter().map(move |b| {
                let mut lits = sel.literals().to_vec();
                lits.extend_from_slice(b.literals());
                Clause::new(lits)
            })
        })
        .collect();
    let mut r = rng::seeded(seed);
    let depth = r.gen_range(0..=2);
    let truth = random_model(2, 1, depth, &mut r).unwrap();
    let src = build_oracle_source(OracleSpec::new(truth)).unwrap();
    let dec = decompose_clauses(&pool, &enc, |_| Some(0.0)).unwrap();
    let table = estimate_v(&dec, &src, 1.0, 0.05, InstanceSource::Enumerate, VMode::Exact, 1 << 20, &mut r).unwrap();
    (src, dec, table)
}

fn exhaustive(c: &Clause, budget: usize, depth: usize, pool: &HashSet<Clause>, w: &HashMap<Clause, f64>) -> f64 {
    let mut best = w[c].abs();
    if budget >= 3 && depth > 0 {
        for v in 0..4 {
            if c.contains_var(v) {
                continue;
            }
            let lo = c.extended(Literal::neg(v)).canonical();
            let hi = c.extended(Literal::pos(v)).canonical();
            if !(pool.contains(&lo) && pool.contains(&hi)) {
                continue;
            }
            for left in (1..budget - 1).step_by(2) {
                let v = exhaustive(&lo, left, depth - 1, pool, w) + exhaustive(&hi, budget - 1 - left, depth - 1, pool, w);
                best = best.max(v);
            }
        }
    }
    best
}

fn tree_worth(t: &DecisionTree, i: usize, c: Clause, w: &HashMap<Clause, f64>) -> f64 {
    match t.nodes()[i] {
        Node::Leaf(b) => if b { w[&c] } else { -w[&c] },
        Node::Split { var, lo, hi } => {
            tree_worth(t, lo as usize, c.extended(Literal::neg(var as usize)).canonical(), w)
                + tree_worth(t, hi as usize, c.extended(Literal::pos(var as usize)).canonical(), w)
        }
    }
}

fn experiment_config() -> impl Strategy<Value = ExperimentConfig> {
    (
        (2usize..=8, 1usize..=8, proptest::collection::vec(1usize..=8, 1..4), proptest::collection::vec(1usize..500, 0..4)),
        (any::<bool>(), any::<u64>(), 1usize..10, "[a-z]{1,8}"),
        (0usize..5, 0.0f64..1.0, proptest::collection::vec(prop_oneof![Just(f64::INFINITY), 0.0f64..10.0], 0..3)),
        (1usize..512, 0.001f64..1.0, 1usize..4096, 0.01f64..0.5),
    )
        .prop_map(|((n, l, depths, ks), (mlp, seed, seeds, out), (distractors, noise, norms), (width, lr, fixed, eps))| {
            let mut cfg = ExperimentConfig {
                n,
                l,
                depths,
                ks,
                backend: if mlp { Backend::Mlp } else { Backend::Oracle },
                seed,
                seeds,
                out_dir: PathBuf::from(out),
                ..ExperimentConfig::default()
            };
            cfg.oracle.distractors = distractors;
            cfg.oracle.noise = noise;
            cfg.lrh.norms = norms;
            cfg.mlp.width = width;
            cfg.mlp.lr = lr;
            cfg.distill.probe.samples = SampleCount::Fixed(fixed);
            cfg.distill.probe.eps = eps;
            cfg
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn dp_matches_exhaustive_search(seed in any::<u64>(), size in prop_oneof![Just(1usize), Just(3), Just(5), Just(7)], depth in 0usize..=2) {
        let mut r = rng::seeded(seed);
        let mut pool = HashSet::from([Clause::empty()]);
        for c in bodies(&[0, 1, 2, 3], 2).into_iter().filter(|c| !c.is_empty()) {
            let closed = c.literals().iter().all(|l| pool.contains(&c.filtered(|m| m != l)));
            if closed && r.gen_bool(0.7) {
                pool.insert(c);
            }
        }
        let list: Vec<Clause> = pool.iter().cloned().collect();
        let weights: Vec<f64> = list.iter().map(|_| r.gen_range(-1.0..1.0)).collect();
        let w: HashMap<Clause, f64> = list.iter().cloned().zip(weights.iter().copied()).collect();
        let dp = tree_dp_single(&list, &weights, size, depth).unwrap();
        let best = exhaustive(&Clause::empty(), size, depth, &pool, &w);
        prop_assert!((dp.value - best).abs() < 1e-12, "dp {} exhaustive {}", dp.value, best);
        prop_assert!((tree_worth(&dp.tree, 0, Clause::empty(), &w) - best).abs() < 1e-12);
        prop_assert!(dp.tree.size() <= size && dp.tree.depth() <= depth);
    }

    #[test]
    fn valuation_is_expected_signed_agreement(seed in any::<u64>()) {
        let (src, dec, table) = setup(seed, 2);
        let mut r = rng::fork(seed, 1);
        let vars = dec.enc.body_vars();
        let trees: Vec<DecisionTree> = (0..2).map(|_| random_tree(r.gen_range(0..=2), &vars, &mut r).unwrap()).collect();
        let v = valuation(&trees, &table, &dec, 1).unwrap();
        let model = LocalIterationModel::new(2, 1, trees).unwrap();
        let insts: Vec<GraphInstance> = GraphInstance::enumerate(2).collect();
        let agree = insts.iter().filter(|g| model.output(g) == src.predict(g)).count() as f64 / insts.len() as f64;
        prop_assert!((v - (2.0 * agree - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn exact_joint_dominates_shortlist(seed in any::<u64>(), size in prop_oneof![Just(1usize), Just(3), Just(5)]) {
        let (src, dec, table) = setup(seed, 1);
        let bank = AgreementBank::new(&src, 1 << 10, &mut rng::seeded(seed)).unwrap();
        let exact = exact_joint_select(&dec, &table, 1, size, 2, 100_000).unwrap();
        let short = shortlist_select(&dec, &table, &bank, 1, size, 2, &ShortlistConfig::default()).unwrap();
        let best = exact.value.unwrap();
        let found = valuation(&short.trees, &table, &dec, 1).unwrap();
        prop_assert!(best >= found - 1e-12, "exact {} shortlist {}", best, found);
        prop_assert!((valuation(&exact.trees, &table, &dec, 1).unwrap() - best).abs() < 1e-12);
    }

    #[test]
    fn shortlist_returns_its_best_score(seed in any::<u64>(), size in prop_oneof![Just(3usize), Just(5)]) {
        let (src, dec, table) = setup(seed, 2);
        let bank = AgreementBank::new(&src, 1 << 10, &mut rng::seeded(seed)).unwrap();
        let sel = shortlist_select(&dec, &table, &bank, 1, size, 2, &ShortlistConfig::default()).unwrap();
        let got = sel.agreement.unwrap();
        let refs: Vec<&DecisionTree> = sel.trees.iter().collect();
        prop_assert_eq!(got, bank.agreement(&refs, &dec.enc, 1));
        for (_, score) in &sel.scored {
            prop_assert!(got >= *score);
        }
    }

    #[test]
    fn configs_round_trip(cfg in experiment_config()) {
        let text = render_config(&cfg).unwrap();
        prop_assert_eq!(parse_config(&text).unwrap(), cfg);
    }
}
