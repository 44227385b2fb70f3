//! Residual MLP trained with hand-written gradients.
//!
//! ```text
//! h0  = act(W0 x + b0)            x in {-1,+1}^p
//! h_k = h_{k-1} + act(W_k h_{k-1} + b_k)   k = 1..depth
//! out = wo . h_depth + bo
//! ```
//!
//! The latent is the concatenation `h0 | h1 | ... | h_depth`.
//!
//! Checkpoint format (UTF-8 text, one record per line):
//!
//! ```text
//! lidistill-mlp 1
//! n=<n> depth=<d> width=<w> activation=<relu|identity> loss=<logistic|squared>
//! bound=<f64> heldout_accuracy=<f64>
//! <name> <rows> <cols>
//! <rows lines of cols space-separated f64>
//! ...
//! ```
//!
//! Parameters appear in the order `w0 b0 w1 b1 ... wo bo`; biases are
//! single-row matrices. Floats use Rust's shortest round-trip form, so a
//! save/load cycle is exact.

use std::fmt::Write as _;

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::SourceModel;
use crate::error::{Error, Result};
use crate::local_iter::{GraphInstance, LocalIterationModel};
use crate::rng::{self, Rng};

const CHECKPOINT_MAGIC: &str = "lidistill-mlp 1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Loss {
    Logistic,
    Squared,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Sgd,
    Adam,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Schedule {
    Constant,
    /// Cosine decay from `lr` to zero over the run.
    Cosine,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MlpConfig {
    /// Residual blocks after the input layer.
    pub depth: usize,
    pub width: usize,
    pub activation: Activation,
    pub loss: Loss,
    pub optimizer: Optimizer,
    pub lr: f64,
    pub schedule: Schedule,
    pub batch: usize,
    pub steps: usize,
    pub seed: u64,
    /// Fresh samples used to measure accuracy and the latent bound.
    pub heldout: usize,
    /// Steps per logged epoch.
    pub log_every: usize,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            depth: 2,
            width: 128,
            activation: Activation::Relu,
            loss: Loss::Logistic,
            optimizer: Optimizer::Sgd,
            lr: 0.05,
            schedule: Schedule::Cosine,
            batch: 64,
            steps: 20_000,
            seed: 0,
            heldout: 4096,
            log_every: 1000,
        }
    }
}

impl MlpConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, msg: &str| {
            Err(Error::Config {
                key: key.into(),
                msg: msg.into(),
            })
        };
        if self.width == 0 {
            return bad("width", "must be positive");
        }
        if self.batch == 0 {
            return bad("batch", "must be positive");
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return bad("lr", "must be a positive finite number");
        }
        if self.heldout == 0 {
            return bad("heldout", "must be positive");
        }
        if self.log_every == 0 {
            return bad("log_every", "must be positive");
        }
        Ok(())
    }
}

/// Network parameters; also used for gradients and optimizer moments.
#[derive(Clone, Debug, PartialEq)]
pub struct Params {
    pub w: Vec<Array2<f64>>,
    pub b: Vec<Array1<f64>>,
    pub wo: Array1<f64>,
    pub bo: f64,
}

impl Params {
    fn zeros_like(p: &Params) -> Params {
        Params {
            w: p.w.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            b: p.b.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
            wo: Array1::zeros(p.wo.raw_dim()),
            bo: 0.0,
        }
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for (w, b) in self.w.iter_mut().zip(self.b.iter_mut()) {
            out.push(w.as_slice_mut().expect("contiguous"));
            out.push(b.as_slice_mut().expect("contiguous"));
        }
        out.push(self.wo.as_slice_mut().expect("contiguous"));
        out.push(std::slice::from_mut(&mut self.bo));
        out
    }

    fn slices(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for (w, b) in self.w.iter().zip(&self.b) {
            out.push(w.as_slice().expect("contiguous"));
            out.push(b.as_slice().expect("contiguous"));
        }
        out.push(self.wo.as_slice().expect("contiguous"));
        out.push(std::slice::from_ref(&self.bo));
        out
    }

    pub fn norm(&self) -> f64 {
        self.slices()
            .iter()
            .flat_map(|s| s.iter())
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }
}

/// The network alone, without training metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub inputs: usize,
    pub activation: Activation,
    pub loss: Loss,
    pub params: Params,
}

struct Tape {
    x: Array2<f64>,
    z: Vec<Array2<f64>>,
    h: Vec<Array2<f64>>,
    out: Array1<f64>,
}

impl Mlp {
    /// He-uniform input layer, residual blocks scaled down by half, small
    /// output layer, zero biases.
    pub fn init(inputs: usize, cfg: &MlpConfig, rng: &mut Rng) -> Mlp {
        let mut uniform = |rows: usize, cols: usize, a: f64| {
            Array2::from_shape_simple_fn((rows, cols), || a * (2.0 * rng.gen::<f64>() - 1.0))
        };
        let mut w = vec![uniform(
            cfg.width,
            inputs,
            (6.0 / inputs.max(1) as f64).sqrt(),
        )];
        for _ in 0..cfg.depth {
            w.push(uniform(
                cfg.width,
                cfg.width,
                0.5 * (6.0 / cfg.width as f64).sqrt(),
            ));
        }
        let wo = uniform(1, cfg.width, (1.0 / cfg.width as f64).sqrt())
            .into_shape_with_order(cfg.width)
            .unwrap();
        let b = (0..=cfg.depth).map(|_| Array1::zeros(cfg.width)).collect();
        Mlp {
            inputs,
            activation: cfg.activation,
            loss: cfg.loss,
            params: Params { w, b, wo, bo: 0.0 },
        }
    }

    pub fn zeros(inputs: usize, cfg: &MlpConfig) -> Mlp {
        let mut w = vec![Array2::zeros((cfg.width, inputs))];
        w.extend((0..cfg.depth).map(|_| Array2::zeros((cfg.width, cfg.width))));
        let b = (0..=cfg.depth).map(|_| Array1::zeros(cfg.width)).collect();
        let params = Params {
            w,
            b,
            wo: Array1::zeros(cfg.width),
            bo: 0.0,
        };
        Mlp {
            inputs,
            activation: cfg.activation,
            loss: cfg.loss,
            params,
        }
    }

    pub fn width(&self) -> usize {
        self.params.wo.len()
    }

    pub fn depth(&self) -> usize {
        self.params.w.len() - 1
    }

    pub fn latent_dim(&self) -> usize {
        self.width() * (self.depth() + 1)
    }

    fn act(&self, z: &Array2<f64>) -> Array2<f64> {
        match self.activation {
            Activation::Relu => z.mapv(|v| v.max(0.0)),
            Activation::Identity => z.clone(),
        }
    }

    fn act_grad(&self, z: f64) -> f64 {
        match self.activation {
            Activation::Relu => (z > 0.0) as u8 as f64,
            Activation::Identity => 1.0,
        }
    }

    fn forward(&self, x: Array2<f64>) -> Tape {
        let p = &self.params;
        let z0 = x.dot(&p.w[0].t()) + &p.b[0];
        let mut h = vec![self.act(&z0)];
        let mut z = vec![z0];
        for k in 1..p.w.len() {
            let zk = h[k - 1].dot(&p.w[k].t()) + &p.b[k];
            let hk = &h[k - 1] + &self.act(&zk);
            z.push(zk);
            h.push(hk);
        }
        let out = h.last().unwrap().dot(&p.wo) + p.bo;
        Tape { x, z, h, out }
    }

    /// Raw outputs for a batch of ±1 inputs.
    pub fn outputs(&self, x: Array2<f64>) -> Array1<f64> {
        self.forward(x).out
    }

    /// Mean loss over the batch.
    pub fn loss_of(&self, out: &Array1<f64>, y: &Array1<f64>) -> f64 {
        let total: f64 = match self.loss {
            Loss::Logistic => Zip::from(out)
                .and(y)
                .fold(0.0, |acc, &o, &t| acc + softplus(o) - t * o),
            Loss::Squared => Zip::from(out)
                .and(y)
                .fold(0.0, |acc, &o, &t| acc + (o - t) * (o - t)),
        };
        total / out.len() as f64
    }

    /// Mean loss and its gradient with respect to every parameter.
    pub fn gradients(&self, x: ArrayView2<f64>, y: &Array1<f64>) -> (f64, Params) {
        let tape = self.forward(x.to_owned());
        let loss = self.loss_of(&tape.out, y);
        let scale = 1.0 / y.len() as f64;
        let g_out: Array1<f64> = match self.loss {
            Loss::Logistic => Zip::from(&tape.out)
                .and(y)
                .map_collect(|&o, &t| (sigmoid(o) - t) * scale),
            Loss::Squared => Zip::from(&tape.out)
                .and(y)
                .map_collect(|&o, &t| 2.0 * (o - t) * scale),
        };
        let p = &self.params;
        let k_last = p.w.len() - 1;
        let mut grad = Params::zeros_like(p);
        grad.wo = tape.h[k_last].t().dot(&g_out);
        grad.bo = g_out.sum();
        let mut g_h = g_out
            .view()
            .insert_axis(Axis(1))
            .dot(&p.wo.view().insert_axis(Axis(0)));
        for k in (0..=k_last).rev() {
            let mut g_z = g_h.clone();
            Zip::from(&mut g_z)
                .and(&tape.z[k])
                .for_each(|g, &z| *g *= self.act_grad(z));
            let input = if k == 0 { &tape.x } else { &tape.h[k - 1] };
            grad.w[k] = g_z.t().dot(input);
            grad.b[k] = g_z.sum_axis(Axis(0));
            if k > 0 {
                // skip path plus the path through the block
                g_h = g_h + g_z.dot(&p.w[k]);
            }
        }
        (loss, grad)
    }

    /// Post-activation hidden layers, concatenated per row.
    pub fn latents(&self, x: Array2<f64>) -> Array2<f64> {
        let tape = self.forward(x);
        let views: Vec<_> = tape.h.iter().map(|h| h.view()).collect();
        ndarray::concatenate(Axis(1), &views).expect("hidden layers share the batch dimension")
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Instance bits (init then adjacency) mapped to ±1, one row per instance.
pub fn input_matrix(insts: &[GraphInstance]) -> Array2<f64> {
    let p = insts
        .first()
        .map(|g| GraphInstance::input_bits(g.n))
        .unwrap_or(0);
    let mut x = Array2::zeros((insts.len(), p));
    for (mut row, g) in x.rows_mut().into_iter().zip(insts) {
        let idx = g.index();
        for (j, v) in row.iter_mut().enumerate() {
            *v = if (idx >> j) & 1 == 1 { 1.0 } else { -1.0 };
        }
    }
    x
}

/// Per-epoch training diagnostics.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    /// Mean minibatch loss over each block of `log_every` steps.
    pub epoch_losses: Vec<f64>,
    pub steps: usize,
}

/// A trained network exposed as a source model.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpSource {
    n: usize,
    pub net: Mlp,
    bound: f64,
    pub heldout_accuracy: f64,
    pub log: TrainLog,
}

/// Trains on a stream of uniform instances labelled by `truth`.
pub fn train_mlp_source(truth: &LocalIterationModel, cfg: &MlpConfig) -> Result<MlpSource> {
    cfg.validate()?;
    let n = truth.n();
    let p = GraphInstance::input_bits(n);
    let mut init_rng = rng::fork(cfg.seed, rng::tag_of(b"mlp-init"));
    let mut data_rng = rng::fork(cfg.seed, rng::tag_of(b"mlp-data"));
    let mut net = Mlp::init(p, cfg, &mut init_rng);
    let mut opt = OptState::new(&net.params, cfg.optimizer);
    let mut log = TrainLog::default();
    let mut running = 0.0;
    for step in 0..cfg.steps {
        let batch: Vec<GraphInstance> = (0..cfg.batch)
            .map(|_| GraphInstance::random(n, &mut data_rng))
            .collect();
        let y: Array1<f64> = batch.iter().map(|g| truth.output(g) as u8 as f64).collect();
        let (loss, grad) = net.gradients(input_matrix(&batch).view(), &y);
        let gnorm = grad.norm();
        if !loss.is_finite() || !gnorm.is_finite() {
            return Err(Error::TrainingDiverged {
                step,
                diagnostics: format!(
                    "loss={loss} grad_norm={gnorm} param_norm={}",
                    net.params.norm()
                ),
            });
        }
        let lr = match cfg.schedule {
            Schedule::Constant => cfg.lr,
            Schedule::Cosine => {
                0.5 * cfg.lr * (1.0 + (std::f64::consts::PI * step as f64 / cfg.steps as f64).cos())
            }
        };
        opt.apply(&mut net.params, &grad, lr);
        running += loss;
        if (step + 1) % cfg.log_every == 0 {
            log.epoch_losses.push(running / cfg.log_every as f64);
            running = 0.0;
        }
    }
    log.steps = cfg.steps;
    let mut held_rng = rng::fork(cfg.seed, rng::tag_of(b"mlp-heldout"));
    let held: Vec<GraphInstance> = (0..cfg.heldout)
        .map(|_| GraphInstance::random(n, &mut held_rng))
        .collect();
    let mut src = MlpSource {
        n,
        net,
        bound: 0.0,
        heldout_accuracy: 0.0,
        log,
    };
    let pred = src.predict_batch(&held);
    let correct = held
        .iter()
        .zip(&pred)
        .filter(|(g, &p)| truth.output(g) == p)
        .count();
    src.heldout_accuracy = correct as f64 / held.len() as f64;
    let lat = src.latent_batch(&held);
    let max_norm = lat
        .rows()
        .into_iter()
        .map(|r| r.dot(&r).sqrt())
        .fold(0.0, f64::max);
    if !max_norm.is_finite() {
        return Err(Error::NonFinite("held-out latent norms".into()));
    }
    src.bound = 1.1 * max_norm;
    Ok(src)
}

struct OptState {
    kind: Optimizer,
    m: Params,
    v: Params,
    t: i32,
}

impl OptState {
    fn new(p: &Params, kind: Optimizer) -> Self {
        OptState {
            kind,
            m: Params::zeros_like(p),
            v: Params::zeros_like(p),
            t: 0,
        }
    }

    fn apply(&mut self, params: &mut Params, grad: &Params, lr: f64) {
        self.t += 1;
        let (b1, b2, eps) = (0.9, 0.999, 1e-8);
        let c1 = 1.0 - f64::powi(b1, self.t);
        let c2 = 1.0 - f64::powi(b2, self.t);
        let kind = self.kind;
        for (((p, g), m), v) in params
            .slices_mut()
            .into_iter()
            .zip(grad.slices())
            .zip(self.m.slices_mut())
            .zip(self.v.slices_mut())
        {
            match kind {
                Optimizer::Sgd => p.iter_mut().zip(g).for_each(|(p, g)| *p -= lr * g),
                Optimizer::Adam => {
                    for i in 0..p.len() {
                        m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                        v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                        p[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
                    }
                }
            }
        }
    }
}

impl MlpSource {
    pub fn from_parts(n: usize, net: Mlp, bound: f64, heldout_accuracy: f64) -> Self {
        MlpSource {
            n,
            net,
            bound,
            heldout_accuracy,
            log: TrainLog::default(),
        }
    }

    fn positive(&self, out: f64) -> bool {
        match self.net.loss {
            Loss::Logistic => out > 0.0,
            Loss::Squared => out >= 0.5,
        }
    }

    pub fn save(&self) -> String {
        let net = &self.net;
        let mut s = String::new();
        let _ = writeln!(s, "{CHECKPOINT_MAGIC}");
        let act = match net.activation {
            Activation::Relu => "relu",
            Activation::Identity => "identity",
        };
        let loss = match net.loss {
            Loss::Logistic => "logistic",
            Loss::Squared => "squared",
        };
        let _ = writeln!(
            s,
            "n={} depth={} width={} activation={act} loss={loss}",
            self.n,
            net.depth(),
            net.width()
        );
        let _ = writeln!(
            s,
            "bound={} heldout_accuracy={}",
            self.bound, self.heldout_accuracy
        );
        let mut put = |name: String, rows: usize, cols: usize, vals: &[f64]| {
            let _ = writeln!(s, "{name} {rows} {cols}");
            for r in 0..rows {
                let line: Vec<String> = vals[r * cols..(r + 1) * cols]
                    .iter()
                    .map(|v| v.to_string())
                    .collect();
                let _ = writeln!(s, "{}", line.join(" "));
            }
        };
        for (k, (w, b)) in net.params.w.iter().zip(&net.params.b).enumerate() {
            put(format!("w{k}"), w.nrows(), w.ncols(), w.as_slice().unwrap());
            put(format!("b{k}"), 1, b.len(), b.as_slice().unwrap());
        }
        put(
            "wo".into(),
            1,
            net.width(),
            net.params.wo.as_slice().unwrap(),
        );
        put("bo".into(), 1, 1, &[net.params.bo]);
        s
    }

    pub fn load(text: &str) -> Result<MlpSource> {
        let mut lines = text.lines().enumerate();
        let mut offset = 0usize;
        let line_starts: Vec<usize> = text
            .lines()
            .map(|l| {
                let at = offset;
                offset += l.len() + 1;
                at
            })
            .collect();
        let perr = |i: usize, msg: String| Error::Parse {
            pos: line_starts.get(i).copied().unwrap_or(text.len()),
            msg,
        };
        let mut next = |what: &str| {
            lines.next().ok_or_else(|| Error::Parse {
                pos: text.len(),
                msg: format!("missing {what}"),
            })
        };
        let (i, magic) = next("header")?;
        if magic.trim() != CHECKPOINT_MAGIC {
            return Err(perr(i, format!("expected `{CHECKPOINT_MAGIC}`")));
        }
        let (i, cfg_line) = next("config line")?;
        let kv = |line: &str, key: &str| -> Option<String> {
            line.split_whitespace()
                .find_map(|t| t.strip_prefix(&format!("{key}=")).map(str::to_string))
        };
        let num = |line: &str, idx: usize, key: &str| -> Result<usize> {
            kv(line, key)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| perr(idx, format!("bad or missing `{key}`")))
        };
        let n = num(cfg_line, i, "n")?;
        let depth = num(cfg_line, i, "depth")?;
        let width = num(cfg_line, i, "width")?;
        let activation = match kv(cfg_line, "activation").as_deref() {
            Some("relu") => Activation::Relu,
            Some("identity") => Activation::Identity,
            _ => return Err(perr(i, "bad activation".into())),
        };
        let loss = match kv(cfg_line, "loss").as_deref() {
            Some("logistic") => Loss::Logistic,
            Some("squared") => Loss::Squared,
            _ => return Err(perr(i, "bad loss".into())),
        };
        let (i, meta) = next("bound line")?;
        let real = |line: &str, key: &str| -> Result<f64> {
            kv(line, key)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| perr(i, format!("bad or missing `{key}`")))
        };
        let bound = real(meta, "bound")?;
        let heldout_accuracy = real(meta, "heldout_accuracy")?;
        let mut read = |name: &str, rows: usize, cols: usize| -> Result<Vec<f64>> {
            let (i, head) = next(name)?;
            if head.split_whitespace().collect::<Vec<_>>()
                != [name, &rows.to_string(), &cols.to_string()]
            {
                return Err(perr(i, format!("expected `{name} {rows} {cols}`")));
            }
            let mut vals = Vec::with_capacity(rows * cols);
            for _ in 0..rows {
                let (i, row) = next(name)?;
                let parsed: Vec<f64> = row
                    .split_whitespace()
                    .map(|t| t.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| perr(i, e.to_string()))?;
                if parsed.len() != cols {
                    return Err(perr(
                        i,
                        format!("expected {cols} values, got {}", parsed.len()),
                    ));
                }
                vals.extend(parsed);
            }
            Ok(vals)
        };
        let p = GraphInstance::input_bits(n);
        let mut w = Vec::new();
        let mut b = Vec::new();
        for k in 0..=depth {
            let cols = if k == 0 { p } else { width };
            w.push(
                Array2::from_shape_vec((width, cols), read(&format!("w{k}"), width, cols)?)
                    .unwrap(),
            );
            b.push(Array1::from(read(&format!("b{k}"), 1, width)?));
        }
        let wo = Array1::from(read("wo", 1, width)?);
        let bo = read("bo", 1, 1)?[0];
        let net = Mlp {
            inputs: p,
            activation,
            loss,
            params: Params { w, b, wo, bo },
        };
        Ok(MlpSource::from_parts(n, net, bound, heldout_accuracy))
    }
}

impl SourceModel for MlpSource {
    fn n(&self) -> usize {
        self.n
    }

    fn dim(&self) -> usize {
        self.net.latent_dim()
    }

    fn bound(&self) -> f64 {
        self.bound
    }

    fn backend(&self) -> &'static str {
        "mlp"
    }

    fn predict(&self, inst: &GraphInstance) -> bool {
        self.predict_batch(std::slice::from_ref(inst))[0]
    }

    fn latent_into(&self, inst: &GraphInstance, out: &mut [f64]) {
        let lat = self.net.latents(input_matrix(std::slice::from_ref(inst)));
        out.copy_from_slice(lat.as_slice().expect("contiguous"));
    }

    fn latent_batch(&self, insts: &[GraphInstance]) -> Array2<f64> {
        let mut out = Array2::zeros((0, self.dim()));
        for chunk in insts.chunks(1024) {
            out.append(Axis(0), self.net.latents(input_matrix(chunk)).view())
                .expect("widths agree");
        }
        out
    }

    fn predict_batch(&self, insts: &[GraphInstance]) -> Vec<bool> {
        let mut out = Vec::with_capacity(insts.len());
        for chunk in insts.chunks(1024) {
            out.extend(
                self.net
                    .outputs(input_matrix(chunk))
                    .iter()
                    .map(|&o| self.positive(o)),
            );
        }
        out
    }
}

/// Largest relative error between manual gradients and central finite
/// differences (step `1e-4`) over `points` random ±1 inputs with random labels.
/// Relative error is `|a - f| / max(1, |a|, |f|)`.
pub fn gradient_check(cfg: &MlpConfig, inputs: usize, points: usize) -> Result<f64> {
    if cfg.width > 8 {
        return Err(Error::Invalid(format!(
            "gradient check expects width <= 8, got {}",
            cfg.width
        )));
    }
    let mut r = rng::fork(cfg.seed, rng::tag_of(b"grad-check"));
    let net = Mlp::init(inputs, cfg, &mut r);
    let x =
        Array2::from_shape_simple_fn(
            (points, inputs),
            || if r.gen::<bool>() { 1.0 } else { -1.0 },
        );
    let y: Array1<f64> = (0..points).map(|_| r.gen::<bool>() as u8 as f64).collect();
    Ok(max_fd_error(&net, &x, &y))
}

pub(crate) fn max_fd_error(net: &Mlp, x: &Array2<f64>, y: &Array1<f64>) -> f64 {
    let h = 1e-4;
    let (_, grad) = net.gradients(x.view(), y);
    let analytic: Vec<f64> = grad
        .slices()
        .iter()
        .flat_map(|s| s.iter().copied())
        .collect();
    let mut probe = net.clone();
    let total = analytic.len();
    let mut worst = 0.0f64;
    for idx in 0..total {
        let numeric = {
            let orig = get_flat(&probe.params, idx);
            set_flat(&mut probe.params, idx, orig + h);
            let up = probe.loss_of(&probe.outputs(x.clone()), y);
            set_flat(&mut probe.params, idx, orig - h);
            let down = probe.loss_of(&probe.outputs(x.clone()), y);
            set_flat(&mut probe.params, idx, orig);
            (up - down) / (2.0 * h)
        };
        let a = analytic[idx];
        worst = worst.max((a - numeric).abs() / 1f64.max(a.abs()).max(numeric.abs()));
    }
    worst
}

fn get_flat(p: &Params, mut idx: usize) -> f64 {
    for s in p.slices() {
        if idx < s.len() {
            return s[idx];
        }
        idx -= s.len();
    }
    panic!("flat index out of range")
}

fn set_flat(p: &mut Params, mut idx: usize, v: f64) {
    for s in p.slices_mut() {
        if idx < s.len() {
            s[idx] = v;
            return;
        }
        idx -= s.len();
    }
    panic!("flat index out of range")
}
