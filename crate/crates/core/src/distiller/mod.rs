//! Two-phase distillation: collect linearly readable clauses, then build
//! per-vertex trees from them.

pub mod dp;
pub mod joint;
pub mod pool;
pub mod run;
pub mod valuation;

pub use dp::{pool_trees, tree_dp_single, tree_value, DpResult, TreeDp};
pub use joint::{
    exact_joint_select, hoeffding_half_width, mc_agreement, prune_vertex, sensitivity_weights,
    shortlist_select, Agreement, AgreementBank, Selection, ShortlistConfig,
};
pub use pool::{
    eps_schedule, exhaustive_probe_count, initial_level, phase1_exact, phase1_topk, vertex_of,
    PartialPool, PathPool, PoolResult,
};
pub use run::{
    distill, truth_agreement, DistillConfig, DistillReport, DistillRun, Phase1Mode, Phase2Mode,
};
pub use valuation::{
    decompose_clauses, decompose_pool, estimate_v, hoeffding_samples, valuation, Decomposition,
    InstanceSource, VMode, ValuationTable,
};
