//! Experiment configuration: TOML in, validated struct out, and back.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::distiller::DistillConfig;
use crate::error::{Error, Result};
use crate::local_iter::MAX_VERTICES;
use crate::probe::{ProbeConfig, SampleCount};
use crate::source::MlpConfig;

/// Overrides the configured output directory.
pub const OUT_DIR_ENV: &str = "LIDISTILL_OUT";

pub const VERSION: &str = concat!("lidistill-", env!("CARGO_PKG_VERSION"));

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Oracle,
    Mlp,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleConfig {
    pub distractors: usize,
    pub noise: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig { distractors: 0, noise: 0.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LrhConfig {
    /// Norm bounds probed per depth; `inf` is unconstrained.
    pub norms: Vec<f64>,
    /// Instances per probe, split evenly into train and test.
    pub samples: usize,
    /// Projected-gradient iterations.
    pub steps: usize,
}

impl Default for LrhConfig {
    fn default() -> Self {
        LrhConfig { norms: vec![f64::INFINITY, 0.001], samples: 4096, steps: 100 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub n: usize,
    pub l: usize,
    pub depths: Vec<usize>,
    pub ks: Vec<usize>,
    pub backend: Backend,
    /// Master seed; seed `i` of a sweep is `seed + i`.
    pub seed: u64,
    pub seeds: usize,
    pub out_dir: PathBuf,
    /// Vertex counts of the separation report.
    pub separation: Vec<usize>,
    pub oracle: OracleConfig,
    pub mlp: MlpConfig,
    pub lrh: LrhConfig,
    /// Template for every end-to-end cell; `l`, `depth`, the top-k size and
    /// the seed are set per cell.
    pub distill: DistillConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            n: 4,
            l: 2,
            depths: vec![2],
            ks: vec![10],
            backend: Backend::Oracle,
            seed: 0,
            seeds: 1,
            out_dir: PathBuf::from("out"),
            separation: (3..=7).collect(),
            oracle: OracleConfig::default(),
            mlp: MlpConfig { width: 256, ..MlpConfig::default() },
            lrh: LrhConfig::default(),
            distill: DistillConfig {
                probe: ProbeConfig {
                    tau: f64::INFINITY,
                    samples: SampleCount::Fixed(2048),
                    ..ProbeConfig::default()
                },
                ..DistillConfig::default()
            },
        }
    }
}

impl ExperimentConfig {
    /// The n=6, l=6 sweep over depths 2..5 and k in {10, 50, 100, 200}.
    pub fn full_profile() -> Self {
        ExperimentConfig {
            n: 6,
            l: 6,
            depths: vec![2, 3, 4, 5],
            ks: vec![10, 50, 100, 200],
            backend: Backend::Mlp,
            seeds: 3,
            ..ExperimentConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, msg: String| Err(Error::Config { key: key.into(), msg });
        if !(2..=MAX_VERTICES).contains(&self.n) {
            return bad("n", format!("must lie in 2..={MAX_VERTICES}, got {}", self.n));
        }
        if self.l == 0 {
            return bad("l", "must be at least 1".into());
        }
        if self.depths.is_empty() {
            return bad("depths", "needs at least one depth".into());
        }
        if let Some(d) = self.depths.iter().find(|&&d| d > 8) {
            return bad("depths", format!("depth {d} exceeds 8"));
        }
        if self.ks.contains(&0) {
            return bad("ks", "top-k sizes must be positive".into());
        }
        if self.seeds == 0 {
            return bad("seeds", "must be at least 1".into());
        }
        if let Some(n) = self.separation.iter().find(|&&n| !(3..=11).contains(&n)) {
            return bad("separation", format!("vertex count {n} outside 3..=11"));
        }
        if !(self.oracle.noise.is_finite() && self.oracle.noise >= 0.0) {
            return bad("oracle.noise", "must be finite and non-negative".into());
        }
        if self.lrh.norms.iter().any(|t| !(*t >= 0.0)) {
            return bad("lrh.norms", "norm bounds must be non-negative".into());
        }
        if self.lrh.samples < 4 {
            return bad("lrh.samples", "need at least 4 samples".into());
        }
        self.mlp
            .validate()
            .map_err(|e| prefix(e, "mlp"))?;
        self.distill
            .validate()
            .map_err(|e| prefix(e, "distill"))?;
        Ok(())
    }

    /// The output directory, after the environment override.
    pub fn resolved_out_dir(&self) -> PathBuf {
        std::env::var_os(OUT_DIR_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| self.out_dir.clone())
    }
}

fn prefix(e: Error, section: &str) -> Error {
    match e {
        Error::Config { key, msg } => Error::Config { key: format!("{section}.{key}"), msg },
        other => other,
    }
}

/// Parses and validates; missing keys take their defaults.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| {
        let key = e.span().map(|s| key_at(text, s.start)).unwrap_or_default();
        Error::Config { key, msg: e.message().to_string() }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

/// `section.key (line N)` for the byte offset of a TOML error.
fn key_at(text: &str, pos: usize) -> String {
    let pos = pos.min(text.len());
    let line_no = text[..pos].matches('\n').count() + 1;
    let mut section = String::new();
    let mut key = String::new();
    for line in text.lines().take(line_no) {
        let t = line.trim();
        if t.starts_with('[') {
            section = t.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            key.clear();
        } else if let Some((k, _)) = t.split_once('=').filter(|_| !t.starts_with('#')) {
            key = k.trim().to_string();
        }
    }
    let path = match (section.is_empty(), key.is_empty()) {
        (true, _) => key,
        (false, true) => section,
        (false, false) => format!("{section}.{key}"),
    };
    format!("{path} (line {line_no})")
}

pub fn render_config(cfg: &ExperimentConfig) -> Result<String> {
    toml::to_string(cfg).map_err(|e| Error::Invalid(format!("config does not render: {e}")))
}

/// First 16 hex digits of the SHA-256 of the rendered config.
pub fn config_hash(cfg: &ExperimentConfig) -> Result<String> {
    let digest = Sha256::digest(render_config(cfg)?.as_bytes());
    Ok(digest[..8].iter().map(|b| format!("{b:02x}")).collect())
}

/// Sets a dotted key in TOML text; the value is read as TOML, or as a
/// string when it does not parse.
pub fn apply_override(text: &str, assignment: &str) -> Result<String> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config { key: assignment.into(), msg: "expected key=value".into() })?;
    let path: Vec<&str> = path.trim().split('.').collect();
    let value = toml::from_str::<toml::Table>(&format!("v = {}", raw.trim()))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.trim().to_string()));
    let mut root: toml::Table = toml::from_str(text).map_err(|e| Error::Config {
        key: e.span().map(|s| key_at(text, s.start)).unwrap_or_default(),
        msg: e.message().to_string(),
    })?;
    let mut table = &mut root;
    for part in &path[..path.len() - 1] {
        table = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| Error::Config { key: path.join("."), msg: format!("`{part}` is not a section") })?;
    }
    table.insert(path[path.len() - 1].to_string(), value);
    Ok(root.to_string())
}
