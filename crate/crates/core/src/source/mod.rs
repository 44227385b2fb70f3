//! Source models: a prediction `ν` and a latent map `φ` with a norm bound.

pub mod mlp;
pub mod oracle;

use ndarray::Array2;

use crate::local_iter::GraphInstance;

pub use mlp::{
    gradient_check, train_mlp_source, Activation, Loss, MlpConfig, MlpSource, Optimizer, Schedule,
    TrainLog,
};
pub use oracle::{build_oracle_source, OracleSource, OracleSpec};

/// Anything the distiller can query: a bit per instance and a real latent
/// vector of fixed dimension whose Euclidean norm never exceeds `bound`.
pub trait SourceModel: Send + Sync {
    fn n(&self) -> usize;

    /// Latent dimension `m`.
    fn dim(&self) -> usize;

    /// `B`, an upper bound on the latent norm.
    fn bound(&self) -> f64;

    fn backend(&self) -> &'static str;

    fn predict(&self, inst: &GraphInstance) -> bool;

    /// Writes `φ(inst)` into `out` (length `dim()`).
    fn latent_into(&self, inst: &GraphInstance, out: &mut [f64]);

    fn latent(&self, inst: &GraphInstance) -> Vec<f64> {
        let mut v = vec![0.0; self.dim()];
        self.latent_into(inst, &mut v);
        v
    }

    /// Latents of many instances, one row each.
    fn latent_batch(&self, insts: &[GraphInstance]) -> Array2<f64> {
        let mut out = Array2::zeros((insts.len(), self.dim()));
        for (mut row, inst) in out.rows_mut().into_iter().zip(insts) {
            self.latent_into(
                inst,
                row.as_slice_mut()
                    .expect("rows of a standard layout array are contiguous"),
            );
        }
        out
    }

    fn predict_batch(&self, insts: &[GraphInstance]) -> Vec<bool> {
        insts.iter().map(|g| self.predict(g)).collect()
    }
}
