//! Norm-constrained linear probes on a source's latent map.
//!
//! Fitting works on sufficient statistics: with `Φ` the `N × m` latent
//! matrix and `y` the targets, the risk of `w` is
//! `wᵀGw − 2bᵀw + c` where `G = ΦᵀΦ/N`, `b = Φᵀy/N`, `c = mean(y²)`.
//! The unconstrained minimiser comes from a ridge-stabilised Cholesky solve;
//! when it lies outside the `τ`-ball, accelerated projected gradient descent
//! takes over.

use std::sync::OnceLock;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::boolean_dt::Clause;
use crate::error::{Error, Result};
use crate::local_iter::{CompiledFeature, GraphInstance, InputEncoding};
use crate::rng::Rng;
use crate::source::SourceModel;

/// How many samples a probe draws.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleCount {
    /// `⌈c (τB + 1)⁴ ε⁻² ln(2/δ)⌉`.
    Auto {
        c: f64,
    },
    Fixed(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeConfig {
    /// Weight-norm bound; `f64::INFINITY` means unconstrained.
    pub tau: f64,
    pub eps: f64,
    pub delta: f64,
    pub samples: SampleCount,
    /// Requests above this many samples fail with a resource error.
    pub max_samples: usize,
    /// Projected-gradient iterations when the constraint is active.
    pub steps: usize,
    /// Fixed step size; `None` uses `1/L` from the Gram spectrum.
    pub step_size: Option<f64>,
    /// Accept iff held-out risk `<= theta * eps`.
    pub theta: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            tau: 1.0,
            eps: 0.05,
            delta: 0.1,
            samples: SampleCount::Auto { c: 64.0 },
            max_samples: 1 << 22,
            steps: 500,
            step_size: None,
            theta: 1.5,
        }
    }
}

impl ProbeConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, msg: &str| {
            Err(Error::Config {
                key: format!("probe.{key}"),
                msg: msg.into(),
            })
        };
        if !(self.tau >= 0.0) {
            return bad("tau", "must be non-negative");
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return bad("eps", "must be positive");
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad("delta", "must lie in (0, 1)");
        }
        if !(self.theta > 1.0 && self.theta < 2.0) {
            return bad("theta", "must lie strictly between 1 and 2");
        }
        match self.samples {
            SampleCount::Auto { c } if !(c > 0.0 && c.is_finite()) => {
                return bad("samples", "constant must be positive")
            }
            SampleCount::Fixed(n) if n < 2 => return bad("samples", "need at least 2 samples"),
            _ => {}
        }
        Ok(())
    }

    /// Sample count for a source with latent bound `bound`.
    pub fn sample_count(&self, bound: f64) -> Result<usize> {
        let n = match self.samples {
            SampleCount::Fixed(n) => n as f64,
            SampleCount::Auto { c } => {
                let tb = if self.tau.is_finite() {
                    self.tau * bound
                } else {
                    f64::INFINITY
                };
                (c * (tb + 1.0).powi(4) / (self.eps * self.eps) * (2.0 / self.delta).ln()).ceil()
            }
        };
        if !(n <= self.max_samples as f64) {
            return Err(Error::Resource(format!(
                "probe needs {n} samples, cap is {}",
                self.max_samples
            )));
        }
        Ok(n as usize)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeOutcome {
    pub accepted: bool,
    pub train_risk: f64,
    /// Held-out risk; drives the decision.
    pub test_risk: f64,
    pub norm: f64,
    pub samples: usize,
}

/// Second-moment summary of `(Φ, y)`.
#[derive(Clone, Debug)]
pub struct Gram {
    pub g: Array2<f64>,
    pub b: Array1<f64>,
    pub c: f64,
    pub n: usize,
}

impl Gram {
    pub fn from_data(phi: ArrayView2<f64>, y: ArrayView1<f64>) -> Result<Gram> {
        let g = moments(phi)?;
        Gram::with_moments(g, phi, y)
    }

    fn with_moments(g: Array2<f64>, phi: ArrayView2<f64>, y: ArrayView1<f64>) -> Result<Gram> {
        let n = phi.nrows();
        if n == 0 || y.len() != n {
            return Err(Error::Dimension(format!(
                "{} latent rows for {} targets",
                n,
                y.len()
            )));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("probe targets".into()));
        }
        let b = phi.t().dot(&y) / n as f64;
        let c = y.dot(&y) / n as f64;
        Ok(Gram { g, b, c, n })
    }

    pub fn risk(&self, w: &Array1<f64>) -> f64 {
        (w.dot(&self.g.dot(w)) - 2.0 * self.b.dot(w) + self.c).max(0.0)
    }
}

fn moments(phi: ArrayView2<f64>) -> Result<Array2<f64>> {
    if phi.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("latent matrix".into()));
    }
    Ok(phi.t().dot(&phi) / phi.nrows().max(1) as f64)
}

/// Lower-triangular Cholesky factor of `G + λI`.
#[derive(Clone, Debug)]
pub struct Cholesky {
    l: Array2<f64>,
}

impl Cholesky {
    pub fn of_ridged(g: &Array2<f64>) -> Cholesky {
        let m = g.nrows();
        let scale = (0..m).map(|i| g[[i, i]]).sum::<f64>() / m.max(1) as f64;
        let lambda = 1e-10 * scale + 1e-14;
        let mut l = Array2::<f64>::zeros((m, m));
        for j in 0..m {
            let row_j = l.row(j).to_owned();
            let d = g[[j, j]] + lambda
                - row_j
                    .slice(ndarray::s![..j])
                    .dot(&row_j.slice(ndarray::s![..j]));
            let d = d.max(lambda).sqrt();
            l[[j, j]] = d;
            for i in j + 1..m {
                let s = l
                    .slice(ndarray::s![i, ..j])
                    .dot(&row_j.slice(ndarray::s![..j]));
                l[[i, j]] = (g[[i, j]] - s) / d;
            }
        }
        Cholesky { l }
    }

    pub fn solve(&self, b: &Array1<f64>) -> Array1<f64> {
        let m = b.len();
        let mut z = Array1::<f64>::zeros(m);
        for i in 0..m {
            let s = self
                .l
                .slice(ndarray::s![i, ..i])
                .dot(&z.slice(ndarray::s![..i]));
            z[i] = (b[i] - s) / self.l[[i, i]];
        }
        let mut x = Array1::<f64>::zeros(m);
        for i in (0..m).rev() {
            let s = self
                .l
                .slice(ndarray::s![i + 1.., i])
                .dot(&x.slice(ndarray::s![i + 1..]));
            x[i] = (z[i] - s) / self.l[[i, i]];
        }
        x
    }
}

fn project(w: &mut Array1<f64>, tau: f64) {
    let norm = w.dot(w).sqrt();
    if norm > tau {
        if tau == 0.0 {
            w.fill(0.0);
        } else {
            *w *= tau / norm;
        }
    }
}

/// Largest eigenvalue of a symmetric PSD matrix by power iteration.
fn top_eigenvalue(g: &Array2<f64>) -> f64 {
    let m = g.nrows();
    let mut v = Array1::from_elem(m, 1.0 / (m as f64).sqrt());
    let mut lam = 0.0;
    for _ in 0..100 {
        let gv = g.dot(&v);
        let norm = gv.dot(&gv).sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let next = norm;
        v = gv / norm;
        if (next - lam).abs() <= 1e-9 * next {
            return next;
        }
        lam = next;
    }
    lam
}

/// Minimises the Gram-form risk over the `τ`-ball.
pub fn fit_gram(
    gram: &Gram,
    tau: f64,
    steps: usize,
    step_size: Option<f64>,
    chol: Option<&Cholesky>,
) -> Array1<f64> {
    let m = gram.b.len();
    if tau == 0.0 || m == 0 {
        return Array1::zeros(m);
    }
    let owned;
    let chol = match chol {
        Some(c) => c,
        None => {
            owned = Cholesky::of_ridged(&gram.g);
            &owned
        }
    };
    let mut w = chol.solve(&gram.b);
    if w.dot(&w).sqrt() <= tau {
        return w;
    }
    project(&mut w, tau);
    let eta = step_size.unwrap_or_else(|| {
        let lip = 2.0 * top_eigenvalue(&gram.g);
        if lip > 0.0 {
            1.0 / lip
        } else {
            1.0
        }
    });
    // FISTA with a projection after every step
    let mut prev = w.clone();
    let mut y = w.clone();
    let mut t = 1.0f64;
    for _ in 0..steps {
        let grad = (gram.g.dot(&y) - &gram.b) * 2.0;
        let mut next = &y - &(grad * eta);
        project(&mut next, tau);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        y = &next + &((&next - &prev) * ((t - 1.0) / t_next));
        project(&mut y, tau);
        prev = next;
        t = t_next;
    }
    prev
}

/// Least squares on `(phi, y)` subject to `‖w‖ <= tau`.
pub fn fit_constrained_linear(
    phi: ArrayView2<f64>,
    y: ArrayView1<f64>,
    tau: f64,
    steps: usize,
    step_size: Option<f64>,
) -> Result<Array1<f64>> {
    if phi.nrows() == 0 {
        return Err(Error::Invalid("no data".into()));
    }
    let gram = Gram::from_data(phi, y)?;
    Ok(fit_gram(&gram, tau, steps, step_size, None))
}

/// Latents of a fixed instance sample, split into train and held-out
/// halves, with the Gram matrices and the train factorisation cached.
pub struct LatentBank {
    pub insts: Vec<GraphInstance>,
    phi: Array2<f64>,
    split: usize,
    g_train: Array2<f64>,
    g_test: Array2<f64>,
    chol: OnceLock<Cholesky>,
}

impl LatentBank {
    pub fn new(source: &dyn SourceModel, samples: usize, rng: &mut Rng) -> Result<LatentBank> {
        if samples < 2 {
            return Err(Error::Invalid(
                "a latent bank needs at least 2 samples".into(),
            ));
        }
        let insts: Vec<GraphInstance> = (0..samples)
            .map(|_| GraphInstance::random(source.n(), rng))
            .collect();
        LatentBank::from_instances(source, insts)
    }

    pub fn from_instances(
        source: &dyn SourceModel,
        insts: Vec<GraphInstance>,
    ) -> Result<LatentBank> {
        let phi = source.latent_batch(&insts);
        let split = insts.len() / 2;
        let g_train = moments(phi.slice(ndarray::s![..split, ..]))?;
        let g_test = moments(phi.slice(ndarray::s![split.., ..]))?;
        Ok(LatentBank {
            insts,
            phi,
            split,
            g_train,
            g_test,
            chol: OnceLock::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.insts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.insts.is_empty()
    }

    pub fn latents(&self) -> ArrayView2<'_, f64> {
        self.phi.view()
    }

    /// Fits on the train half and scores on the held-out half.
    pub fn probe(&self, y: &[f64], cfg: &ProbeConfig) -> Result<ProbeOutcome> {
        if y.len() != self.insts.len() {
            return Err(Error::Dimension(format!(
                "{} targets for {} bank rows",
                y.len(),
                self.insts.len()
            )));
        }
        let y = ArrayView1::from(y);
        let train = Gram::with_moments(
            self.g_train.clone(),
            self.phi.slice(ndarray::s![..self.split, ..]),
            y.slice(ndarray::s![..self.split]),
        )?;
        let test = Gram::with_moments(
            self.g_test.clone(),
            self.phi.slice(ndarray::s![self.split.., ..]),
            y.slice(ndarray::s![self.split..]),
        )?;
        let chol = self.chol.get_or_init(|| Cholesky::of_ridged(&self.g_train));
        let w = fit_gram(&train, cfg.tau, cfg.steps, cfg.step_size, Some(chol));
        Ok(outcome(&train, &test, &w, cfg, self.insts.len()))
    }

    /// Probe for the key feature `A^l[AND_S]`.
    pub fn probe_clause(&self, s: &Clause, l: usize, cfg: &ProbeConfig) -> Result<ProbeOutcome> {
        let n = self.insts.first().map(|g| g.n).unwrap_or(1);
        let f = CompiledFeature::new(s, l, &InputEncoding::new(n)?);
        let y: Vec<f64> = self.insts.iter().map(|g| f.eval(g) as u8 as f64).collect();
        self.probe(&y, cfg)
    }
}

fn outcome(
    train: &Gram,
    test: &Gram,
    w: &Array1<f64>,
    cfg: &ProbeConfig,
    samples: usize,
) -> ProbeOutcome {
    let test_risk = test.risk(w);
    ProbeOutcome {
        accepted: test_risk <= cfg.theta * cfg.eps,
        train_risk: train.risk(w),
        test_risk,
        norm: w.dot(w).sqrt(),
        samples,
    }
}

/// LinearProbe: draws fresh samples, fits on half, decides on the other half.
pub fn linear_probe(
    g: &(dyn Fn(&GraphInstance) -> bool + Sync),
    source: &dyn SourceModel,
    cfg: &ProbeConfig,
    rng: &mut Rng,
) -> Result<ProbeOutcome> {
    cfg.validate()?;
    let n = cfg.sample_count(source.bound())?.max(2);
    let insts: Vec<GraphInstance> = (0..n)
        .map(|_| GraphInstance::random(source.n(), rng))
        .collect();
    let phi = source.latent_batch(&insts);
    let y: Array1<f64> = insts.iter().map(|x| g(x) as u8 as f64).collect();
    let split = n / 2;
    let train = Gram::from_data(
        phi.slice(ndarray::s![..split, ..]),
        y.slice(ndarray::s![..split]),
    )?;
    let test = Gram::from_data(
        phi.slice(ndarray::s![split.., ..]),
        y.slice(ndarray::s![split..]),
    )?;
    let w = fit_gram(&train, cfg.tau, cfg.steps, cfg.step_size, None);
    Ok(outcome(&train, &test, &w, cfg, n))
}

/// Held-out squared error of the best norm-bounded readout of `A^l[AND_S]`.
pub fn probe_error(s: &Clause, l: usize, bank: &LatentBank, cfg: &ProbeConfig) -> Result<f64> {
    Ok(bank.probe_clause(s, l, cfg)?.test_risk)
}

/// Mean squared error of `w` on `(phi, y)`.
pub fn empirical_risk(phi: ArrayView2<f64>, y: ArrayView1<f64>, w: &Array1<f64>) -> f64 {
    let r = phi.dot(w) - y;
    r.dot(&r) / phi.len_of(Axis(0)).max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn degenerate_ball_returns_zero() {
        let phi = array![[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
        let y = array![1.0, 0.0, 1.0];
        let w = fit_constrained_linear(phi.view(), y.view(), 0.0, 100, None).unwrap();
        assert_eq!(w, array![0.0, 0.0]);
        assert!((empirical_risk(phi.view(), y.view(), &w) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn scalar_projection_closed_form() {
        let phi = array![[-1.0], [1.0]];
        let y = array![-2.0, 2.0];
        let w = fit_constrained_linear(phi.view(), y.view(), 1.0, 100, None).unwrap();
        assert!((w[0] - 1.0).abs() < 1e-12);
        assert!((empirical_risk(phi.view(), y.view(), &w) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn realizable_target_is_fit() {
        let phi = array![
            [1.0, 0.0, 1.0],
            [0.0, 1.0, 1.0],
            [1.0, 1.0, 1.0],
            [0.0, 0.0, 1.0]
        ];
        let y = phi.column(1).to_owned();
        let w = fit_constrained_linear(phi.view(), y.view(), 1.0, 100, None).unwrap();
        assert!(empirical_risk(phi.view(), y.view(), &w) <= 1e-6);
    }

    #[test]
    fn non_finite_data_is_rejected() {
        let phi = array![[f64::NAN]];
        assert!(matches!(
            fit_constrained_linear(phi.view(), array![1.0].view(), 1.0, 10, None),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn auto_sample_count_and_cap() {
        let cfg = ProbeConfig {
            tau: 1.0,
            eps: 0.1,
            delta: 0.1,
            ..ProbeConfig::default()
        };
        let want = (64.0 * 16.0f64 / 0.01 * 20f64.ln()).ceil() as usize;
        assert_eq!(cfg.sample_count(1.0).unwrap(), want);
        assert!(matches!(cfg.sample_count(100.0), Err(Error::Resource(_))));
        let fixed = ProbeConfig {
            samples: SampleCount::Fixed(100),
            ..cfg
        };
        assert_eq!(fixed.sample_count(1e9).unwrap(), 100);
    }

    #[test]
    fn theta_must_be_inside_the_gap() {
        assert!(ProbeConfig {
            theta: 2.0,
            ..ProbeConfig::default()
        }
        .validate()
        .is_err());
        assert!(ProbeConfig {
            theta: 1.0,
            ..ProbeConfig::default()
        }
        .validate()
        .is_err());
    }
}
