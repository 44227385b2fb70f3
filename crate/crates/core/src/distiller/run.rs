use serde::{Deserialize, Serialize};

use super::joint::{
    exact_joint_select, mc_agreement, shortlist_select, AgreementBank, Selection, ShortlistConfig,
};
use super::pool::{phase1_exact, phase1_topk, PartialPool, PathPool};
use super::valuation::{decompose_pool, estimate_v, InstanceSource, VMode};
use crate::error::{Error, Result};
use crate::local_iter::{GraphInstance, InputEncoding, LocalIterationModel};
use crate::probe::{LatentBank, ProbeConfig};
use crate::rng;
use crate::source::SourceModel;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase1Mode {
    /// Every survivor is extended; each probe draws fresh samples.
    Exact,
    /// Only the `k` best clauses per vertex are extended.
    Topk { k: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase2Mode {
    ExactJoint,
    Shortlist,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DistillConfig {
    pub l: usize,
    /// Per-vertex tree depth. `S_0` already holds the full selector paths,
    /// so Phase 1 runs `depth` extension rounds.
    pub depth: usize,
    /// Per-vertex size bound; `None` means a complete tree of `depth`.
    pub max_size: Option<usize>,
    pub phase1: Phase1Mode,
    pub probe: ProbeConfig,
    /// Overall Phase-1 failure budget (exact mode).
    pub delta: f64,
    /// Largest pool level before Phase 1 gives up.
    pub pool_cap: usize,
    /// Shared latent sample for top-k probing.
    pub validation_samples: usize,
    pub phase2: Phase2Mode,
    pub v_eps: f64,
    pub v_delta: f64,
    pub v_source: InstanceSource,
    /// Largest exact valuation table.
    pub tuple_cap: usize,
    /// Largest enumerated tree list per vertex in exact-joint mode.
    pub tree_cap: usize,
    pub shortlist: ShortlistConfig,
    /// Agreement bank used to score and report.
    pub agreement_samples: usize,
    pub agreement_delta: f64,
    pub seed: u64,
}

impl Default for DistillConfig {
    fn default() -> Self {
        DistillConfig {
            l: 2,
            depth: 2,
            max_size: None,
            phase1: Phase1Mode::Topk { k: 10 },
            probe: ProbeConfig::default(),
            delta: 0.1,
            pool_cap: 200_000,
            validation_samples: 4096,
            phase2: Phase2Mode::Shortlist,
            v_eps: 0.1,
            v_delta: 0.05,
            v_source: InstanceSource::Random {
                samples: Some(16_384),
            },
            tuple_cap: 1 << 20,
            tree_cap: 100_000,
            shortlist: ShortlistConfig::default(),
            agreement_samples: 16_384,
            agreement_delta: 0.05,
            seed: 0,
        }
    }
}

impl DistillConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, msg: &str| {
            Err(Error::Config {
                key: key.into(),
                msg: msg.into(),
            })
        };
        self.probe.validate()?;
        if let Phase1Mode::Topk { k: 0 } = self.phase1 {
            return bad("phase1.k", "must be at least 1");
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad("delta", "must lie in (0, 1)");
        }
        if !(self.v_eps > 0.0 && self.v_eps.is_finite()) {
            return bad("v_eps", "must be positive");
        }
        if !(self.v_delta > 0.0 && self.v_delta < 1.0) {
            return bad("v_delta", "must lie in (0, 1)");
        }
        if !(self.agreement_delta > 0.0 && self.agreement_delta < 1.0) {
            return bad("agreement_delta", "must lie in (0, 1)");
        }
        if self.agreement_samples == 0 {
            return bad("agreement_samples", "must be at least 1");
        }
        if self.validation_samples < 2 {
            return bad("validation_samples", "must be at least 2");
        }
        if matches!(self.max_size, Some(s) if s == 0 || s % 2 == 0) {
            return bad("max_size", "tree sizes are odd and positive");
        }
        Ok(())
    }

    pub fn size_bound(&self) -> usize {
        self.max_size
            .unwrap_or((1usize << (self.depth + 1).min(20)) - 1)
    }
}

/// What a run did, filled in as far as it got.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DistillReport {
    pub n: usize,
    pub l: usize,
    pub depth: usize,
    pub k: Option<usize>,
    pub probes: usize,
    pub exhaustive_probes: Option<u128>,
    pub probe_fraction: Option<f64>,
    /// `|S_i|` per Phase-1 depth.
    pub pool_sizes: Vec<usize>,
    pub paths_per_vertex: Vec<usize>,
    pub candidates_per_vertex: Vec<usize>,
    pub v_samples: usize,
    pub products_scored: usize,
    pub source_agreement: Option<f64>,
    pub agreement_half_width: Option<f64>,
    /// Agreement with the truth model, exact when the space was enumerated.
    pub truth_agreement: Option<f64>,
    pub truth_enumerated: bool,
    pub error: Option<String>,
}

pub struct DistillRun {
    pub report: DistillReport,
    pub result: Result<LocalIterationModel>,
}

/// Phase 1, decomposition, valuation estimates, selection, assembly.
/// The report is returned even when a stage fails.
pub fn distill(
    source: &dyn SourceModel,
    cfg: &DistillConfig,
    truth: Option<&LocalIterationModel>,
) -> DistillRun {
    let mut report = DistillReport {
        n: source.n(),
        l: cfg.l,
        depth: cfg.depth,
        k: match cfg.phase1 {
            Phase1Mode::Topk { k } => Some(k),
            Phase1Mode::Exact => None,
        },
        ..Default::default()
    };
    let result = stages(source, cfg, truth, &mut report);
    if let Err(e) = &result {
        report.error = Some(e.to_string());
    }
    DistillRun { report, result }
}

fn record_pool(report: &mut DistillReport, pool: &PathPool) {
    report.probes = pool.probes;
    report.exhaustive_probes = pool.exhaustive_probes;
    report.probe_fraction = pool.probe_fraction();
    report.pool_sizes = pool.sizes();
}

fn stages(
    source: &dyn SourceModel,
    cfg: &DistillConfig,
    truth: Option<&LocalIterationModel>,
    report: &mut DistillReport,
) -> Result<LocalIterationModel> {
    cfg.validate()?;
    let enc = InputEncoding::new(source.n())?;
    let r = cfg.depth;
    let pool = match cfg.phase1 {
        Phase1Mode::Exact => phase1_exact(
            source,
            r,
            cfg.l,
            cfg.delta,
            &cfg.probe,
            cfg.pool_cap,
            cfg.seed,
        ),
        Phase1Mode::Topk { k } => {
            let bank = LatentBank::new(
                source,
                cfg.validation_samples,
                &mut rng::fork(cfg.seed, rng::tag_of(b"bank")),
            )?;
            phase1_topk(source, r, cfg.l, k, &bank, &cfg.probe, cfg.pool_cap)
        }
    };
    let pool = pool.map_err(|PartialPool { error, pool }| {
        record_pool(report, &pool);
        error
    })?;
    record_pool(report, &pool);
    let dec = decompose_pool(&pool)?;
    let size = cfg.size_bound();
    let mode = match cfg.phase2 {
        Phase2Mode::ExactJoint => VMode::Exact,
        Phase2Mode::Shortlist => VMode::Marginal,
    };
    let mut vrng = rng::fork(cfg.seed, rng::tag_of(b"valuation"));
    let table = estimate_v(
        &dec,
        source,
        cfg.v_eps,
        cfg.v_delta,
        cfg.v_source,
        mode,
        cfg.tuple_cap,
        &mut vrng,
    )?;
    report.v_samples = table.samples;
    let bank = AgreementBank::new(
        source,
        cfg.agreement_samples,
        &mut rng::fork(cfg.seed, rng::tag_of(b"agreement")),
    )?;
    let sel: Selection = match cfg.phase2 {
        Phase2Mode::ExactJoint => {
            exact_joint_select(&dec, &table, cfg.l, size, cfg.depth, cfg.tree_cap)?
        }
        Phase2Mode::Shortlist => {
            shortlist_select(&dec, &table, &bank, cfg.l, size, cfg.depth, &cfg.shortlist)?
        }
    };
    report.paths_per_vertex = sel.paths_per_vertex.clone();
    report.candidates_per_vertex = sel.candidates_per_vertex.clone();
    report.products_scored = sel.scored.len();
    let model = LocalIterationModel::new(enc.n, cfg.l, sel.trees)?;
    if bank.enumerated {
        let refs: Vec<_> = model.trees().iter().collect();
        report.source_agreement = Some(bank.agreement(&refs, &enc, cfg.l));
        report.agreement_half_width = Some(0.0);
    } else {
        // fresh instances, so the estimate is not biased by the search
        let mut arng = rng::fork(cfg.seed, rng::tag_of(b"report"));
        let a = mc_agreement(
            &model,
            source,
            cfg.agreement_samples,
            cfg.agreement_delta,
            &mut arng,
        )?;
        report.source_agreement = Some(a.rate);
        report.agreement_half_width = Some(a.half_width);
    }
    if let Some(truth) = truth {
        let (rate, exact) = truth_agreement(&model, truth, cfg.agreement_samples, cfg.seed)?;
        report.truth_agreement = Some(rate);
        report.truth_enumerated = exact;
    }
    Ok(model)
}

/// Largest input space compared exhaustively against a truth model.
pub const TRUTH_ENUMERATION_BITS: usize = 20;

/// Agreement of two models; exact over the input space when it is small.
pub fn truth_agreement(
    model: &LocalIterationModel,
    truth: &LocalIterationModel,
    samples: usize,
    seed: u64,
) -> Result<(f64, bool)> {
    if model.n() != truth.n() {
        return Err(Error::Dimension(format!(
            "model has n={}, truth has n={}",
            model.n(),
            truth.n()
        )));
    }
    let n = model.n();
    if GraphInstance::input_bits(n) <= TRUTH_ENUMERATION_BITS {
        let total = 1u64 << GraphInstance::input_bits(n);
        let hits = GraphInstance::enumerate(n)
            .filter(|g| model.output(g) == truth.output(g))
            .count();
        return Ok((hits as f64 / total as f64, true));
    }
    let mut r = rng::fork(seed, rng::tag_of(b"truth"));
    let hits = (0..samples.max(1))
        .map(|_| GraphInstance::random(n, &mut r))
        .filter(|g| model.output(g) == truth.output(g))
        .count();
    Ok((hits as f64 / samples.max(1) as f64, false))
}
