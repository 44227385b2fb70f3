//! Graph input encoding, the local-iteration executor and its key features.

pub mod encoding;
pub mod features;
pub mod model;
pub mod reach;

pub use encoding::{ceil_log2, GraphInstance, InputEncoding, VarKind, MAX_VERTICES};
pub use features::{
    brute_force_support, dependency_set, feature_value, feature_value_naive, CompiledFeature,
    InputBit,
};
pub use model::{random_model, run_in_order, run_local_iteration, LocalIterationModel, Trace};
pub use reach::{build_two_reachability_model, two_reachability_truth, TWO_REACHABILITY_INIT};
