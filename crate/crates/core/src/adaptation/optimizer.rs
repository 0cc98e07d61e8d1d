//! Gradient-free optimizers with a full evaluation trace.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::loss::{ncac_loss, LossSpec, PhiTarget};
use super::model::{Measurement, PhiModel};
use crate::error::{Error, Result};
use crate::phi::PhiConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerKind {
    #[default]
    Spsa,
    FiniteDifference,
    RandomSearch,
}

/// Step sizes follow `a_k = a / (k + A)^alpha`, perturbations `c_k = c / (k + 1)^gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub a: f64,
    #[serde(rename = "A")]
    pub big_a: f64,
    pub alpha: f64,
    pub c: f64,
    pub gamma: f64,
    pub max_evals: usize,
    pub tol: f64,
    pub seed: u64,
    pub weight_bounds: [f64; 2],
    pub stagnation_window: usize,
    pub stagnation_floor: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            kind: OptimizerKind::Spsa,
            a: 0.2,
            big_a: 50.0,
            alpha: 0.602,
            c: 0.1,
            gamma: 0.101,
            max_evals: 5000,
            tol: 1e-3,
            seed: 0,
            weight_bounds: [-2.0, 2.0],
            stagnation_window: 200,
            stagnation_floor: 1e-6,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if !(self.a > 0.0 && self.c > 0.0) {
            return bad("optimizer gains a and c must be positive");
        }
        if !(self.big_a >= 0.0) {
            return bad("optimizer offset A must be non-negative");
        }
        if !(self.alpha > 0.5 && self.alpha <= 1.0) {
            return bad("step exponent alpha must lie in (0.5, 1]");
        }
        if !(self.gamma > 0.0 && self.gamma <= 0.5) {
            return bad("perturbation exponent gamma must lie in (0, 0.5]");
        }
        if self.max_evals < 1 {
            return bad("max_evals must be at least 1");
        }
        if !(self.tol >= 0.0) {
            return bad("tol must be non-negative");
        }
        let [lo, hi] = self.weight_bounds;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return bad("weight_bounds must be finite with lo < hi");
        }
        if self.stagnation_window < 1 {
            return bad("stagnation_window must be at least 1");
        }
        Ok(())
    }

    pub fn a_k(&self, k: usize) -> f64 {
        self.a / (k as f64 + self.big_a).max(1.0).powf(self.alpha)
    }

    pub fn c_k(&self, k: usize) -> f64 {
        self.c / (k as f64 + 1.0).powf(self.gamma)
    }

    pub fn project(&self, params: &mut [f64]) {
        let [lo, hi] = self.weight_bounds;
        params.iter_mut().for_each(|p| *p = p.clamp(lo, hi));
    }
}

/// One loss evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    /// Model Φ at the evaluated point, when the loss is a Φ gap.
    pub phi: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalKind {
    /// The current iterate.
    Center,
    Plus,
    Minus,
    /// Finite-difference coordinate probes and random-search candidates.
    Probe,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Tol,
    MaxEvals,
    Stagnation,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::Tol => "tol",
            StopReason::MaxEvals => "max_evals",
            StopReason::Stagnation => "stagnation",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    /// 1-based count of evaluations so far.
    pub eval: usize,
    pub iteration: usize,
    pub kind: EvalKind,
    pub loss: f64,
    pub phi: Option<f64>,
    /// Index into [`AdaptationTrace::snapshots`].
    pub snapshot: usize,
    pub best_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptationTrace {
    pub entries: Vec<TraceEntry>,
    /// Parameter vector of every evaluation.
    pub snapshots: Vec<Vec<f64>>,
    pub best_loss: f64,
    pub best_params: Vec<f64>,
    pub converged: bool,
    pub stop_reason: StopReason,
}

impl AdaptationTrace {
    pub fn evals(&self) -> usize {
        self.entries.len()
    }

    pub fn best_so_far(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.best_loss).collect()
    }

    /// `eval,loss,phi,stop_reason`; the stop reason appears on the final row, `-` elsewhere.
    pub fn to_csv(&self, fmt_f64: impl Fn(f64) -> String) -> String {
        let mut out = String::from("eval,loss,phi,stop_reason\n");
        let last = self.entries.len().saturating_sub(1);
        for (k, e) in self.entries.iter().enumerate() {
            let phi = e.phi.map_or_else(|| "-".to_string(), &fmt_f64);
            let reason = if k == last { self.stop_reason.as_str() } else { "-" };
            out.push_str(&format!("{},{},{phi},{reason}\n", e.eval, fmt_f64(e.loss)));
        }
        out
    }
}

/// Result of one SPSA update.
#[derive(Debug, Clone, PartialEq)]
pub struct SpsaStep {
    pub params: Vec<f64>,
    pub gradient: Vec<f64>,
    /// Perturbation size actually used (halved once after a non-finite evaluation).
    pub c_k: f64,
    /// Every evaluation made, in order, with the point it was made at.
    pub evaluations: Vec<(EvalKind, Vec<f64>, Evaluation)>,
}

fn shifted(params: &[f64], delta: &[f64], scale: f64, cfg: &OptimizerConfig) -> Vec<f64> {
    let mut p: Vec<f64> = params.iter().zip(delta).map(|(x, d)| x + scale * d).collect();
    cfg.project(&mut p);
    p
}

fn spsa_step_inner<F>(
    params: &[f64],
    k: usize,
    cfg: &OptimizerConfig,
    loss_fn: &F,
    rng: &mut ChaCha8Rng,
    allow_retry: bool,
) -> Result<SpsaStep>
where
    F: Fn(&[f64]) -> Result<Evaluation> + Sync,
{
    let delta: Vec<f64> = params.iter().map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
    let mut c_k = cfg.c_k(k);
    let mut evaluations = Vec::with_capacity(2);
    for attempt in 0..2 {
        let plus = shifted(params, &delta, c_k, cfg);
        let minus = shifted(params, &delta, -c_k, cfg);
        let (lp, lm) = rayon::join(|| loss_fn(&plus), || loss_fn(&minus));
        let (lp, lm) = (lp?, lm?);
        evaluations.push((EvalKind::Plus, plus, lp));
        evaluations.push((EvalKind::Minus, minus, lm));
        if lp.loss.is_finite() && lm.loss.is_finite() {
            let gradient: Vec<f64> = delta.iter().map(|d| (lp.loss - lm.loss) / (2.0 * c_k * d)).collect();
            let a_k = cfg.a_k(k);
            let mut next: Vec<f64> = params.iter().zip(&gradient).map(|(x, g)| x - a_k * g).collect();
            cfg.project(&mut next);
            return Ok(SpsaStep { params: next, gradient, c_k, evaluations });
        }
        if attempt == 0 && allow_retry {
            c_k /= 2.0;
        } else {
            break;
        }
    }
    Err(Error::NonFinite(format!(
        "SPSA iteration {k}: loss evaluated to {:?} / {:?} at c_k = {c_k:e} around {params:?}",
        evaluations.last().map(|e| e.2.loss),
        evaluations.iter().rev().nth(1).map(|e| e.2.loss),
    )))
}

/// One SPSA update: Rademacher perturbation of size `c_k`, two evaluations, gradient
/// estimate, step of size `a_k` and projection onto the bounds.
pub fn spsa_step<F>(params: &[f64], k: usize, cfg: &OptimizerConfig, loss_fn: &F, rng: &mut ChaCha8Rng) -> Result<SpsaStep>
where
    F: Fn(&[f64]) -> Result<Evaluation> + Sync,
{
    spsa_step_inner(params, k, cfg, loss_fn, rng, true)
}

struct Recorder<'a> {
    cfg: &'a OptimizerConfig,
    entries: Vec<TraceEntry>,
    snapshots: Vec<Vec<f64>>,
    best_loss: f64,
    best_params: Vec<f64>,
    last_improvement: usize,
}

impl<'a> Recorder<'a> {
    fn new(cfg: &'a OptimizerConfig) -> Self {
        Self {
            cfg,
            entries: Vec::new(),
            snapshots: Vec::new(),
            best_loss: f64::INFINITY,
            best_params: Vec::new(),
            last_improvement: 0,
        }
    }

    fn record(&mut self, iteration: usize, kind: EvalKind, params: Vec<f64>, e: Evaluation) {
        let eval = self.entries.len() + 1;
        if e.loss < self.best_loss {
            if self.best_loss - e.loss > self.cfg.stagnation_floor {
                self.last_improvement = eval;
            }
            self.best_loss = e.loss;
            self.best_params = params.clone();
        }
        self.entries.push(TraceEntry {
            eval,
            iteration,
            kind,
            loss: e.loss,
            phi: e.phi,
            snapshot: self.snapshots.len(),
            best_loss: self.best_loss,
        });
        self.snapshots.push(params);
    }

    fn remaining(&self) -> usize {
        self.cfg.max_evals - self.entries.len()
    }

    fn stop(&self) -> Option<StopReason> {
        if self.best_loss <= self.cfg.tol {
            Some(StopReason::Tol)
        } else if self.entries.len() >= self.cfg.max_evals {
            Some(StopReason::MaxEvals)
        } else if self.entries.len() - self.last_improvement >= self.cfg.stagnation_window {
            Some(StopReason::Stagnation)
        } else {
            None
        }
    }

    fn diagnostics(&self) -> String {
        format!("after {} evaluations (best loss {:e} at {:?})", self.entries.len(), self.best_loss, self.best_params)
    }

    fn finish(self, reason: StopReason) -> AdaptationTrace {
        AdaptationTrace {
            converged: self.best_loss <= self.cfg.tol,
            entries: self.entries,
            snapshots: self.snapshots,
            best_loss: self.best_loss,
            best_params: self.best_params,
            stop_reason: reason,
        }
    }
}

fn finite_or_abort(e: Evaluation, rec: &Recorder) -> Result<Evaluation> {
    if e.loss.is_finite() {
        Ok(e)
    } else {
        Err(Error::NonFinite(format!("loss {} {}", e.loss, rec.diagnostics())))
    }
}

/// Minimizes `loss_fn` from `x0` inside the configured bounds. Every evaluation is
/// recorded; the best point seen is returned in the trace.
pub fn minimize<F>(x0: &[f64], cfg: &OptimizerConfig, loss_fn: F) -> Result<AdaptationTrace>
where
    F: Fn(&[f64]) -> Result<Evaluation> + Sync,
{
    cfg.validate()?;
    let [lo, hi] = cfg.weight_bounds;
    if let Some(bad) = x0.iter().find(|x| !(lo..=hi).contains(*x)) {
        return Err(Error::Config(format!("initial parameter {bad} lies outside [{lo}, {hi}]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rec = Recorder::new(cfg);
    let first = finite_or_abort(loss_fn(x0)?, &rec)?;
    rec.record(0, EvalKind::Center, x0.to_vec(), first);
    let mut x = x0.to_vec();
    let mut k = 0usize;
    let reason = loop {
        if let Some(r) = rec.stop() {
            break r;
        }
        match cfg.kind {
            OptimizerKind::Spsa => {
                if rec.remaining() < 2 {
                    break StopReason::MaxEvals;
                }
                let step = spsa_step_inner(&x, k, cfg, &loss_fn, &mut rng, rec.remaining() >= 4)
                    .map_err(|e| Error::NonFinite(format!("{e} {}", rec.diagnostics())))?;
                for (kind, p, e) in step.evaluations.into_iter().filter(|(_, _, e)| e.loss.is_finite()) {
                    rec.record(k + 1, kind, p, e);
                }
                x = step.params;
            }
            OptimizerKind::FiniteDifference => {
                if rec.remaining() < 2 * x.len() {
                    break StopReason::MaxEvals;
                }
                let c_k = cfg.c_k(k);
                let probes: Vec<(Vec<f64>, Vec<f64>)> = (0..x.len())
                    .map(|i| {
                        let mut e = vec![0.0; x.len()];
                        e[i] = 1.0;
                        (shifted(&x, &e, c_k, cfg), shifted(&x, &e, -c_k, cfg))
                    })
                    .collect();
                let values: Vec<(Evaluation, Evaluation)> = probes
                    .par_iter()
                    .map(|(p, m)| Ok((loss_fn(p)?, loss_fn(m)?)))
                    .collect::<Result<_>>()?;
                let mut grad = Vec::with_capacity(x.len());
                for (i, ((p, m), (lp, lm))) in probes.into_iter().zip(values).enumerate() {
                    let (lp, lm) = (finite_or_abort(lp, &rec)?, finite_or_abort(lm, &rec)?);
                    grad.push((lp.loss - lm.loss) / (p[i] - m[i]).max(f64::MIN_POSITIVE));
                    rec.record(k + 1, EvalKind::Probe, p, lp);
                    rec.record(k + 1, EvalKind::Probe, m, lm);
                }
                let a_k = cfg.a_k(k);
                x.iter_mut().zip(&grad).for_each(|(xi, g)| *xi -= a_k * g);
                cfg.project(&mut x);
            }
            OptimizerKind::RandomSearch => {
                let scale = cfg.c_k(k) * (hi - lo);
                let z: Vec<f64> = x.iter().map(|_| rng.sample(StandardNormal)).collect();
                let candidate = shifted(&rec.best_params, &z, scale, cfg);
                let e = finite_or_abort(loss_fn(&candidate)?, &rec)?;
                rec.record(k + 1, EvalKind::Probe, candidate, e);
                x = rec.best_params.clone();
                k += 1;
                continue;
            }
        }
        k += 1;
        if let Some(r) = rec.stop() {
            break r;
        }
        let e = finite_or_abort(loss_fn(&x)?, &rec)?;
        rec.record(k, EvalKind::Center, x.clone(), e);
    };
    Ok(rec.finish(reason))
}

/// Tunes `model`'s parameters to shrink the Φ gap to `target`. Returns the best model seen.
pub fn adapt<M: PhiModel>(
    model: &M,
    target: &PhiTarget,
    cfg: &OptimizerConfig,
    spec: &LossSpec,
    phi_config: &PhiConfig,
    measurement: &Measurement,
) -> Result<(M, AdaptationTrace)> {
    target.validate()?;
    let loss_fn = |p: &[f64]| {
        let m = model.with_parameters(p)?;
        let v = ncac_loss(&m, target, spec, phi_config, measurement)?;
        Ok(Evaluation { loss: v.loss, phi: Some(v.mean_phi(target)) })
    };
    let trace = minimize(&model.parameters(), cfg, loss_fn)?;
    Ok((model.with_parameters(&trace.best_params)?, trace))
}
