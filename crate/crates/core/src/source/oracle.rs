use std::collections::BTreeSet;

use rand::seq::SliceRandom;

use super::SourceModel;
use crate::boolean_dt::Clause;
use crate::error::{Error, Result};
use crate::local_iter::{
    dependency_set, CompiledFeature, GraphInstance, InputBit, LocalIterationModel,
};
use crate::rng;

/// Synthetic source aligned with a truth model by construction.
#[derive(Clone, Debug)]
pub struct OracleSpec {
    pub truth: LocalIterationModel,
    /// Number of parity coordinates over bits no planted feature reads.
    pub distractors: usize,
    /// Amplitude of the bounded deterministic noise added to every coordinate.
    pub noise: f64,
    pub seed: u64,
}

impl OracleSpec {
    pub fn new(truth: LocalIterationModel) -> Self {
        OracleSpec {
            truth,
            distractors: 0,
            noise: 0.0,
            seed: 0,
        }
    }
}

/// Latent = one coordinate `A^l[AND_S]` per root-prefix path `S` of the
/// truth's global tree, then distractor parities, plus optional noise.
#[derive(Clone, Debug)]
pub struct OracleSource {
    truth: LocalIterationModel,
    planted: Vec<Clause>,
    features: Vec<CompiledFeature>,
    /// Each distractor is the parity of the instance-index bits in its mask.
    distractors: Vec<u128>,
    noise: f64,
    seed: u64,
    bound: f64,
}

/// Builds the oracle source. Distractors are distinct parities over random
/// subsets (of size at most 3) of the bits outside every planted dependency set.
pub fn build_oracle_source(spec: OracleSpec) -> Result<OracleSource> {
    let truth = spec.truth;
    let (n, l) = (truth.n(), truth.l());
    if !(spec.noise.is_finite() && spec.noise >= 0.0) {
        return Err(Error::Invalid(format!(
            "noise amplitude {} must be finite and non-negative",
            spec.noise
        )));
    }
    let planted = truth.global_tree().root_prefix_paths();
    let features = planted
        .iter()
        .map(|s| CompiledFeature::new(s, l, truth.encoding()))
        .collect();
    let used: BTreeSet<usize> = planted
        .iter()
        .flat_map(|s| dependency_set(s, l, n))
        .map(|b: InputBit| b.position(n))
        .collect();
    let free: Vec<usize> = (0..GraphInstance::input_bits(n))
        .filter(|p| !used.contains(p))
        .collect();
    let distractors = draw_parities(&free, spec.distractors, spec.seed)?;
    let m = planted.len() + distractors.len();
    let bound = (m as f64).sqrt() * (1.0 + spec.noise);
    Ok(OracleSource {
        truth,
        planted,
        features,
        distractors,
        noise: spec.noise,
        seed: spec.seed,
        bound,
    })
}

fn draw_parities(free: &[usize], count: usize, seed: u64) -> Result<Vec<u128>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    let k = free.len();
    let available: u128 = (1..=3.min(k)).map(|s| binom(k, s)).sum();
    if (count as u128) > available {
        return Err(Error::DistractorBudget(format!(
            "{count} distractors requested, {k} free bits allow {available}"
        )));
    }
    let mut rng = rng::fork(seed, rng::tag_of(b"distractors"));
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let size = 1 + (rand::Rng::gen_range(&mut rng, 0..3.min(k)));
        let mask = free
            .choose_multiple(&mut rng, size)
            .fold(0u128, |m, &p| m | 1 << p);
        if seen.insert(mask) {
            out.push(mask);
        }
    }
    Ok(out)
}

fn binom(n: usize, k: usize) -> u128 {
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

impl OracleSource {
    pub fn truth(&self) -> &LocalIterationModel {
        &self.truth
    }

    /// Planted clauses in coordinate order.
    pub fn planted(&self) -> &[Clause] {
        &self.planted
    }

    pub fn distractor_masks(&self) -> &[u128] {
        &self.distractors
    }

    /// Coordinate of a planted clause, if any.
    pub fn coordinate_of(&self, s: &Clause) -> Option<usize> {
        self.planted.iter().position(|p| p == s)
    }

    fn noise_at(&self, inst: &GraphInstance, coord: usize) -> f64 {
        let mut h = inst.index() as u64 ^ ((inst.index() >> 64) as u64).rotate_left(17);
        h ^= (coord as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ self.seed;
        let mut r = rng::fork(h, coord as u64);
        self.noise * (2.0 * rand::Rng::gen::<f64>(&mut r) - 1.0)
    }
}

impl SourceModel for OracleSource {
    fn n(&self) -> usize {
        self.truth.n()
    }

    fn dim(&self) -> usize {
        self.features.len() + self.distractors.len()
    }

    fn bound(&self) -> f64 {
        self.bound
    }

    fn backend(&self) -> &'static str {
        "oracle"
    }

    fn predict(&self, inst: &GraphInstance) -> bool {
        self.truth.output(inst)
    }

    fn latent_into(&self, inst: &GraphInstance, out: &mut [f64]) {
        let idx = inst.index();
        for (o, f) in out.iter_mut().zip(&self.features) {
            *o = f.eval(inst) as u8 as f64;
        }
        for (o, &m) in out[self.features.len()..].iter_mut().zip(&self.distractors) {
            *o = ((idx & m).count_ones() & 1) as f64;
        }
        if self.noise > 0.0 {
            for (i, o) in out.iter_mut().enumerate() {
                *o += self.noise_at(inst, i);
            }
        }
    }
}
