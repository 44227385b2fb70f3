//! Experiment drivers. Every table is assembled from cells; a finished
//! cell is cached under `cache/<config hash>/` and skipped on rerun.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::config::{config_hash, render_config, Backend, ExperimentConfig, VERSION};
use super::table::{fmt_f64, Table};
use crate::boolean_dt::{selector_path, serialize_bundle, Clause};
use crate::distiller::{distill, DistillRun, Phase1Mode};
use crate::error::{Error, Result};
use crate::local_iter::{random_model, GraphInstance, LocalIterationModel};
use crate::probe::{LatentBank, ProbeConfig, SampleCount};
use crate::rng;
use crate::separation::separation_report;
use crate::source::{build_oracle_source, train_mlp_source, MlpConfig, MlpSource, OracleSpec, SourceModel};

pub const LRH_COLUMNS: [&str; 7] = ["depth", "norm", "n_conj", "source_acc", "avg_train_err", "avg_test_err", "seed"];
pub const PROBE_COLUMNS: [&str; 7] = ["clause", "depth", "train_err", "test_err", "accepted", "norm", "seed"];
pub const E2E_COLUMNS: [&str; 15] = [
    "depth",
    "k",
    "source_acc",
    "distill_acc",
    "probes",
    "probe_frac",
    "seed",
    "truth_acc",
    "agreement_hw",
    "paths_per_vertex",
    "candidates_per_vertex",
    "pool_sizes",
    "products_scored",
    "v_samples",
    "error",
];
pub const SEPARATION_COLUMNS: [&str; 7] = ["n", "total", "negatives", "min_leaves", "lower_bound", "dp_agreement", "growth"];

/// A truth model and the source standing in for it.
pub struct Prepared {
    pub truth: LocalIterationModel,
    pub source: Box<dyn SourceModel>,
    pub source_acc: f64,
}

/// Per-vertex random trees of `depth`, keyed by `(seed, depth)` only, so the
/// LRH and end-to-end tables share truths.
pub fn truth_for(cfg: &ExperimentConfig, depth: usize, seed: u64) -> Result<LocalIterationModel> {
    let tag = rng::tag_of(format!("truth-depth-{depth}").as_bytes());
    random_model(cfg.n, cfg.l, depth, &mut rng::fork(seed, tag))
}

fn sha_hex(text: &str) -> String {
    Sha256::digest(text.as_bytes())[..8].iter().map(|b| format!("{b:02x}")).collect()
}

fn mlp_config_for(cfg: &ExperimentConfig, seed: u64) -> MlpConfig {
    MlpConfig { seed: cfg.mlp.seed.wrapping_add(seed), ..cfg.mlp.clone() }
}

/// Trains or loads the source for a truth. Trained checkpoints are cached
/// under `sources/`, keyed by the truth and the network config.
pub fn prepare(cfg: &ExperimentConfig, depth: usize, seed: u64) -> Result<Prepared> {
    let truth = truth_for(cfg, depth, seed)?;
    let source: Box<dyn SourceModel> = match cfg.backend {
        Backend::Oracle => Box::new(build_oracle_source(OracleSpec {
            truth: truth.clone(),
            distractors: cfg.oracle.distractors,
            noise: cfg.oracle.noise,
            seed,
        })?),
        Backend::Mlp => {
            let mcfg = mlp_config_for(cfg, seed);
            let mtext = toml::to_string(&mcfg).map_err(|e| Error::Invalid(e.to_string()))?;
            let key = sha_hex(&format!("{}\n{mtext}", serialize_bundle(&truth.to_bundle())));
            let path = cfg.resolved_out_dir().join("sources").join(format!("{key}.mlp"));
            match fs::read_to_string(&path) {
                Ok(text) => Box::new(MlpSource::load(&text)?),
                Err(_) => {
                    let src = train_mlp_source(&truth, &mcfg)?;
                    write_atomic(&path, &src.save())?;
                    Box::new(src)
                }
            }
        }
    };
    let (source_acc, _) = source_accuracy(source.as_ref(), &truth, cfg.distill.agreement_samples, seed)?;
    Ok(Prepared { truth, source, source_acc })
}

/// Agreement of the source's prediction with the truth; exact when the
/// input space is small enough to enumerate.
pub fn source_accuracy(
    source: &dyn SourceModel,
    truth: &LocalIterationModel,
    samples: usize,
    seed: u64,
) -> Result<(f64, bool)> {
    let n = truth.n();
    let (insts, exact): (Vec<GraphInstance>, bool) = if GraphInstance::input_bits(n) <= 16 {
        (GraphInstance::enumerate(n).collect(), true)
    } else {
        let mut r = rng::fork(seed, rng::tag_of(b"source-accuracy"));
        ((0..samples.max(1)).map(|_| GraphInstance::random(n, &mut r)).collect(), false)
    };
    let pred = source.predict_batch(&insts);
    let hits = insts.iter().zip(&pred).filter(|(g, &p)| truth.output(g) == p).count();
    Ok((hits as f64 / insts.len() as f64, exact))
}

/// Per-vertex root-prefix conjunctions of the truth, each behind its
/// selector path.
pub fn truth_conjunctions(truth: &LocalIterationModel) -> Vec<Clause> {
    let enc = truth.encoding();
    truth
        .trees()
        .iter()
        .enumerate()
        .flat_map(|(u, t)| {
            let sel = selector_path(enc, u);
            t.root_prefix_paths().into_iter().map(move |s| {
                let mut lits = sel.literals().to_vec();
                lits.extend_from_slice(s.literals());
                Clause::new(lits)
            })
        })
        .collect()
}

fn write_atomic(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, text)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Finished cells of one config.
pub struct CellCache {
    dir: PathBuf,
}

impl CellCache {
    pub fn new(out_dir: &Path, hash: &str) -> Self {
        CellCache { dir: out_dir.join("cache").join(hash) }
    }

    pub fn get(&self, cell: &str) -> Option<Table> {
        Table::parse(&fs::read_to_string(self.dir.join(format!("{cell}.csv"))).ok()?).ok()
    }

    pub fn put(&self, cell: &str, t: &Table) -> Result<()> {
        write_atomic(&self.dir.join(format!("{cell}.csv")), &t.to_csv())
    }

    /// Cached rows of `cell`, or the rows `run` produces.
    pub fn rows(&self, cell: &str, columns: &[&str], run: impl FnOnce() -> Result<Table>) -> Result<Table> {
        if let Some(t) = self.get(cell).filter(|t| t.columns == columns) {
            return Ok(t);
        }
        let t = run()?;
        self.put(cell, &t)?;
        Ok(t)
    }
}

/// Writes `<name>.csv` with the hash, seed and version on top, and echoes
/// the config next to it.
pub fn write_table(cfg: &ExperimentConfig, name: &str, table: &Table) -> Result<PathBuf> {
    let out = cfg.resolved_out_dir();
    let hash = config_hash(cfg)?;
    let mut t = table.clone();
    t.meta = vec![
        ("config_hash".into(), hash.clone()),
        ("seed".into(), cfg.seed.to_string()),
        ("version".into(), VERSION.into()),
    ];
    let path = out.join(format!("{name}.csv"));
    write_atomic(&path, &t.to_csv())?;
    write_atomic(&out.join(format!("config-{hash}.toml")), &render_config(cfg)?)?;
    Ok(path)
}

pub struct LrhTables {
    pub summary: Table,
    pub probes: Table,
}

fn norm_label(tau: f64) -> String {
    if tau.is_finite() {
        tau.to_string()
    } else {
        "inf".into()
    }
}

fn lrh_cell(cfg: &ExperimentConfig, depth: usize, seed: u64) -> Result<(Table, Table)> {
    let prep = prepare(cfg, depth, seed)?;
    let conj = truth_conjunctions(&prep.truth);
    let mut brng = rng::fork(seed, rng::tag_of(format!("lrh-bank-{depth}").as_bytes()));
    let bank = LatentBank::new(prep.source.as_ref(), cfg.lrh.samples, &mut brng)?;
    let mut summary = Table::new(&LRH_COLUMNS);
    let mut probes = Table::new(&PROBE_COLUMNS);
    for &tau in &cfg.lrh.norms {
        let pcfg = ProbeConfig {
            tau,
            steps: cfg.lrh.steps,
            samples: SampleCount::Fixed(cfg.lrh.samples),
            ..cfg.distill.probe.clone()
        };
        let outcomes = conj
            .par_iter()
            .map(|c| bank.probe_clause(c, cfg.l, &pcfg))
            .collect::<Result<Vec<_>>>()?;
        let m = outcomes.len().max(1) as f64;
        let train = outcomes.iter().map(|o| o.train_risk).sum::<f64>() / m;
        let test = outcomes.iter().map(|o| o.test_risk).sum::<f64>() / m;
        summary.push(vec![
            depth.to_string(),
            norm_label(tau),
            conj.len().to_string(),
            fmt_f64(prep.source_acc),
            fmt_f64(train),
            fmt_f64(test),
            seed.to_string(),
        ])?;
        for (c, o) in conj.iter().zip(&outcomes) {
            probes.push(vec![
                c.to_string(),
                depth.to_string(),
                fmt_f64(o.train_risk),
                fmt_f64(o.test_risk),
                o.accepted.to_string(),
                norm_label(tau),
                seed.to_string(),
            ])?;
        }
    }
    Ok((summary, probes))
}

/// Probes every root-prefix conjunction of the true trees under each norm
/// setting, per depth and seed. Writes `lrh.csv` and `lrh_probes.csv`.
pub fn run_lrh_table(cfg: &ExperimentConfig) -> Result<LrhTables> {
    cfg.validate()?;
    let cache = CellCache::new(&cfg.resolved_out_dir(), &config_hash(cfg)?);
    let mut summary = Table::new(&LRH_COLUMNS);
    let mut probes = Table::new(&PROBE_COLUMNS);
    for &depth in &cfg.depths {
        for i in 0..cfg.seeds as u64 {
            let seed = cfg.seed + i;
            let cell = format!("lrh-d{depth}-s{seed}");
            let mut detail = None;
            let s = cache.rows(&cell, &LRH_COLUMNS, || {
                let (s, p) = lrh_cell(cfg, depth, seed)?;
                detail = Some(p);
                Ok(s)
            })?;
            let pcell = format!("{cell}-probes");
            let p = match detail {
                Some(p) => {
                    cache.put(&pcell, &p)?;
                    p
                }
                None => cache.rows(&pcell, &PROBE_COLUMNS, || Ok(lrh_cell(cfg, depth, seed)?.1))?,
            };
            summary.rows.extend(s.rows);
            probes.rows.extend(p.rows);
        }
    }
    write_table(cfg, "lrh", &summary)?;
    write_table(cfg, "lrh_probes", &probes)?;
    Ok(LrhTables { summary, probes })
}

fn e2e_row(depth: usize, k: &str, seed: u64, source_acc: f64, run: &DistillRun) -> Vec<String> {
    let r = &run.report;
    let opt = |x: Option<f64>| x.map(fmt_f64).unwrap_or_default();
    let join = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("/");
    vec![
        depth.to_string(),
        k.to_string(),
        fmt_f64(source_acc),
        opt(r.source_agreement),
        r.probes.to_string(),
        opt(r.probe_fraction),
        seed.to_string(),
        opt(r.truth_agreement),
        opt(r.agreement_half_width),
        join(&r.paths_per_vertex),
        join(&r.candidates_per_vertex),
        join(&r.pool_sizes),
        r.products_scored.to_string(),
        r.v_samples.to_string(),
        r.error.clone().unwrap_or_default(),
    ]
}

/// Distills every (depth, k, seed) cell. A failing cell is recorded in the
/// `error` column and the sweep goes on. With an exact Phase 1 the k list
/// is ignored. Writes `e2e.csv` and the recovered models under `models/`.
pub fn run_e2e_table(cfg: &ExperimentConfig) -> Result<Table> {
    cfg.validate()?;
    let out = cfg.resolved_out_dir();
    let cache = CellCache::new(&out, &config_hash(cfg)?);
    let ks: Vec<Option<usize>> = match cfg.distill.phase1 {
        Phase1Mode::Exact => vec![None],
        Phase1Mode::Topk { .. } => cfg.ks.iter().map(|&k| Some(k)).collect(),
    };
    let mut table = Table::new(&E2E_COLUMNS);
    for &depth in &cfg.depths {
        for i in 0..cfg.seeds as u64 {
            let seed = cfg.seed + i;
            let mut prep: Option<Prepared> = None;
            for &k in &ks {
                let label = k.map(|k| k.to_string()).unwrap_or_else(|| "exact".into());
                let cell = format!("e2e-d{depth}-k{label}-s{seed}");
                let t = cache.rows(&cell, &E2E_COLUMNS, || {
                    let p = match prep.take() {
                        Some(p) => p,
                        None => prepare(cfg, depth, seed)?,
                    };
                    let mut dcfg = cfg.distill.clone();
                    dcfg.l = cfg.l;
                    dcfg.depth = depth;
                    dcfg.seed = seed;
                    if let Some(k) = k {
                        dcfg.phase1 = Phase1Mode::Topk { k };
                    }
                    let run = distill(p.source.as_ref(), &dcfg, Some(&p.truth));
                    if let Ok(model) = &run.result {
                        write_atomic(&out.join("models").join(format!("{cell}.trees")), &serialize_bundle(&model.to_bundle()))?;
                    }
                    let mut t = Table::new(&E2E_COLUMNS);
                    t.push(e2e_row(depth, &label, seed, p.source_acc, &run))?;
                    prep = Some(p);
                    Ok(t)
                })?;
                table.rows.extend(t.rows);
            }
        }
    }
    write_table(cfg, "e2e", &table)?;
    Ok(table)
}

/// The separation report over `cfg.separation`. Writes `separation.csv`.
pub fn run_separation(cfg: &ExperimentConfig) -> Result<Table> {
    cfg.validate()?;
    let mut table = Table::new(&SEPARATION_COLUMNS);
    for r in separation_report(cfg.separation.iter().copied())? {
        table.push(vec![
            r.n.to_string(),
            r.total.to_string(),
            r.negatives.to_string(),
            r.min_leaves.map(|m| m.to_string()).unwrap_or_default(),
            r.lower_bound.to_string(),
            fmt_f64(r.dp_agreement),
            r.growth.map(fmt_f64).unwrap_or_default(),
        ])?;
    }
    write_table(cfg, "separation", &table)?;
    Ok(table)
}
