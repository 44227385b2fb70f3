//! Distillation of source models into local-iteration graph models whose
//! per-vertex aggregators are decision trees.

pub mod bits;
pub mod boolean_dt;
pub mod distiller;
pub mod error;
pub mod harness;
pub mod local_iter;
pub mod probe;
pub mod rng;
pub mod separation;
pub mod source;

pub use error::{Error, Result};
