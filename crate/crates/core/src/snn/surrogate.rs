//! Rate matching with surrogate gradients.
//!
//! Training runs a continuous relaxation of the network: the Heaviside spike becomes a
//! sigmoid `spike(v)` whose derivative is the chosen surrogate shape (scaled to unit
//! mass), and reset is subtractive, `v -= spike(v) * (v_th - v_reset)`. Refractoriness is
//! not modelled in the relaxation. Rates are read from exponentially smoothed spike traces
//! (time constant `5 dt`), so the loss is a smooth function of the weights and its exact
//! reverse-mode gradient is the surrogate gradient.

use serde::{Deserialize, Serialize};

use super::network::{noise_matrix, SpikingNetwork, Stimulus};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SurrogateShape {
    /// `1 / (1 + slope |v - v_th|)^2`
    FastSigmoid,
    /// `max(0, 1 - slope |v - v_th|)`
    PiecewiseLinear,
}

impl SurrogateShape {
    /// Relaxed spike in `[0, 1]` and its derivative, as functions of `u = v - v_th`.
    #[inline]
    fn spike(self, u: f64, slope: f64) -> (f64, f64) {
        match self {
            SurrogateShape::FastSigmoid => {
                let d = 1.0 + slope * u.abs();
                (0.5 * (1.0 + slope * u / d), 0.5 * slope / (d * d))
            }
            SurrogateShape::PiecewiseLinear => {
                let a = slope * u.abs();
                if a >= 1.0 {
                    (if u > 0.0 { 1.0 } else { 0.0 }, 0.0)
                } else {
                    (0.5 + slope * u - 0.5 * slope * slope * u * u.abs(), slope * (1.0 - a))
                }
            }
        }
    }

    /// The surrogate shape itself, unnormalized.
    pub fn derivative(self, u: f64, slope: f64) -> f64 {
        match self {
            SurrogateShape::FastSigmoid => 1.0 / (1.0 + slope * u.abs()).powi(2),
            SurrogateShape::PiecewiseLinear => (1.0 - slope * u.abs()).max(0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateSpec {
    pub shape: SurrogateShape,
    pub slope: f64,
    /// Target rate per neuron, Hz.
    pub target_rates: Vec<f64>,
}

impl SurrogateSpec {
    pub fn fast_sigmoid(target_rates: Vec<f64>) -> Self {
        Self { shape: SurrogateShape::FastSigmoid, slope: 10.0, target_rates }
    }

    fn validate(&self, n: usize) -> Result<()> {
        if !(self.slope > 0.0 && self.slope.is_finite()) {
            return Err(Error::Config("surrogate slope must be positive".into()));
        }
        if self.target_rates.len() != n {
            return Err(Error::Input(format!(
                "{} target rates for {n} neurons",
                self.target_rates.len()
            )));
        }
        if self.target_rates.iter().any(|r| !(*r >= 0.0 && r.is_finite())) {
            return Err(Error::Config("target rates must be finite and non-negative".into()));
        }
        Ok(())
    }
}

/// Gradient of the rate loss with respect to the trainable parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct RateGradient {
    /// `n x n`, indexed like [`SpikingNetwork::weights`]; zero off the structural synapses.
    pub weights: Vec<f64>,
    /// Per-neuron multiplier on the external stimulus.
    pub input_gain: Vec<f64>,
}

impl RateGradient {
    pub fn norm(&self) -> f64 {
        self.weights
            .iter()
            .chain(&self.input_gain)
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }
}

struct Relaxed {
    /// membrane before reset, `steps x n`
    v_pre: Vec<f64>,
    /// relaxed spikes, `steps x n`
    spikes: Vec<f64>,
    rates: Vec<f64>,
}

const TRACE_STEPS: f64 = 5.0;

fn trace_decay() -> f64 {
    (-1.0 / TRACE_STEPS).exp()
}

fn forward(net: &SpikingNetwork, spec: &SurrogateSpec, stimulus: &Stimulus, noise: Option<&[f64]>) -> Relaxed {
    let n = net.n();
    let steps = stimulus.steps();
    let params = net.params();
    let gain = net.input_gain();
    let synapses = net.synapses();
    let alpha = trace_decay();
    let mut v: Vec<f64> = net.membrane().to_vec();
    let mut v_pre = vec![0.0; steps * n];
    let mut spikes = vec![0.0; steps * n];
    let mut trace = vec![0.0; n];
    let mut trace_sum = vec![0.0; n];
    let mut current = vec![0.0; n];
    for t in 0..steps {
        for i in 0..n {
            current[i] = gain[i] * stimulus.at(t, i) + noise.map_or(0.0, |z| z[t * n + i]);
        }
        for &(pre, post) in &synapses {
            let d = net.delay(pre, post) as usize;
            if t >= d {
                current[post] += net.weight(pre, post) * spikes[(t - d) * n + pre];
            }
        }
        for i in 0..n {
            let p = &params[i];
            let vp = v[i] + (p.dt / p.tau_m) * (-(v[i] - p.v_rest) + p.r_m * current[i]);
            let (s, _) = spec.shape.spike(vp - p.v_th, spec.slope);
            v_pre[t * n + i] = vp;
            spikes[t * n + i] = s;
            v[i] = vp - s * (p.v_th - p.v_reset);
            trace[i] = alpha * trace[i] + (1.0 - alpha) * s;
            trace_sum[i] += trace[i];
        }
    }
    let scale = rate_scale(net, steps);
    Relaxed { v_pre, spikes, rates: trace_sum.iter().map(|s| s * scale).collect() }
}

/// Converts a summed per-step trace into Hz.
fn rate_scale(net: &SpikingNetwork, steps: usize) -> f64 {
    1000.0 / (steps.max(1) as f64 * net.dt())
}

fn mse(rates: &[f64], targets: &[f64]) -> f64 {
    rates.iter().zip(targets).map(|(r, t)| (r - t).powi(2)).sum::<f64>() / rates.len() as f64
}

fn relaxed_noise(net: &SpikingNetwork, stimulus: &Stimulus, seed: u64) -> Option<Vec<f64>> {
    noise_matrix(net.n(), stimulus.steps(), net.input_noise(), seed)
}

fn check_inputs(net: &SpikingNetwork, spec: &SurrogateSpec, stimulus: &Stimulus) -> Result<()> {
    spec.validate(net.n())?;
    if stimulus.n() != net.n() {
        return Err(Error::Input(format!("stimulus has {} columns for {} neurons", stimulus.n(), net.n())));
    }
    if stimulus.steps() == 0 {
        return Err(Error::Input("stimulus has no steps".into()));
    }
    Ok(())
}

/// Smoothed rates (Hz) of the relaxed network.
pub fn relaxed_rates(net: &SpikingNetwork, spec: &SurrogateSpec, stimulus: &Stimulus, seed: u64) -> Result<Vec<f64>> {
    check_inputs(net, spec, stimulus)?;
    let noise = relaxed_noise(net, stimulus, seed);
    Ok(forward(net, spec, stimulus, noise.as_deref()).rates)
}

/// Mean squared rate error of the relaxed network.
pub fn smoothed_rate_loss(net: &SpikingNetwork, spec: &SurrogateSpec, stimulus: &Stimulus, seed: u64) -> Result<f64> {
    let rates = relaxed_rates(net, spec, stimulus, seed)?;
    Ok(mse(&rates, &spec.target_rates))
}

/// Loss and its gradient by backpropagation through time.
pub fn rate_loss_and_gradient(
    net: &SpikingNetwork,
    spec: &SurrogateSpec,
    stimulus: &Stimulus,
    seed: u64,
) -> Result<(f64, RateGradient)> {
    check_inputs(net, spec, stimulus)?;
    let noise = relaxed_noise(net, stimulus, seed);
    let fwd = forward(net, spec, stimulus, noise.as_deref());
    let n = net.n();
    let steps = stimulus.steps();
    let params = net.params();
    let loss = mse(&fwd.rates, &spec.target_rates);

    let scale = rate_scale(net, steps);
    let alpha = trace_decay();
    let rate_err: Vec<f64> = fwd
        .rates
        .iter()
        .zip(&spec.target_rates)
        .map(|(r, t)| 2.0 * (r - t) / n as f64)
        .collect();

    // Outgoing synapses per presynaptic neuron, for the spike adjoint.
    let mut outgoing: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); n];
    for (pre, post) in net.synapses() {
        outgoing[pre].push((post, net.delay(pre, post) as usize, net.weight(pre, post)));
    }

    let mut current_adj = vec![0.0; steps * n];
    let mut v_pre_adj_next = vec![0.0; n];
    // alpha^(steps - t), built up as t decreases
    let mut tail = 1.0;
    for t in (0..steps).rev() {
        tail *= alpha;
        for i in 0..n {
            let p = &params[i];
            let leak = 1.0 - p.dt / p.tau_m;
            let v_adj = if t + 1 < steps { leak * v_pre_adj_next[i] } else { 0.0 };
            let mut s_adj = rate_err[i] * scale * (1.0 - tail) - (p.v_th - p.v_reset) * v_adj;
            for &(post, d, w) in &outgoing[i] {
                if t + d < steps {
                    s_adj += w * current_adj[(t + d) * n + post];
                }
            }
            let (_, ds) = spec.shape.spike(fwd.v_pre[t * n + i] - p.v_th, spec.slope);
            let v_pre_adj = v_adj + s_adj * ds;
            current_adj[t * n + i] = v_pre_adj * (p.dt / p.tau_m) * p.r_m;
            v_pre_adj_next[i] = v_pre_adj;
        }
    }

    let mut weights = vec![0.0; n * n];
    for (pre, post) in net.synapses() {
        let d = net.delay(pre, post) as usize;
        weights[pre * n + post] = (d..steps)
            .map(|t| current_adj[t * n + post] * fwd.spikes[(t - d) * n + pre])
            .sum();
    }
    let input_gain = (0..n)
        .map(|i| (0..steps).map(|t| current_adj[t * n + i] * stimulus.at(t, i)).sum())
        .collect();
    Ok((loss, RateGradient { weights, input_gain }))
}

/// Result of [`train_rate_match`].
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub net: SpikingNetwork,
    /// Loss before each epoch's update.
    pub loss_history: Vec<f64>,
    /// Input gains after each epoch's update.
    pub gain_history: Vec<Vec<f64>>,
}

/// Gradient descent on structural weights and input gains toward the target rates.
///
/// Aborts with [`Error::Divergence`] if the loss exceeds a million times its initial value.
pub fn train_rate_match(
    net: &SpikingNetwork,
    spec: &SurrogateSpec,
    stimulus: &Stimulus,
    epochs: usize,
    lr: f64,
    seed: u64,
) -> Result<TrainOutcome> {
    if epochs == 0 {
        return Err(Error::Config("training needs at least one epoch".into()));
    }
    if !(lr > 0.0 && lr.is_finite()) {
        return Err(Error::Config("learning rate must be positive".into()));
    }
    let mut net = net.clone();
    let mut loss_history = Vec::with_capacity(epochs);
    let mut gain_history = Vec::with_capacity(epochs);
    let synapses = net.synapses();
    for epoch in 0..epochs {
        let (loss, grad) = rate_loss_and_gradient(&net, spec, stimulus, seed)?;
        if let Some(&initial) = loss_history.first() {
            if !loss.is_finite() || (initial > 0.0 && loss > 1e6 * initial) {
                return Err(Error::Divergence(format!(
                    "epoch {epoch}: loss {loss:e} vs initial {initial:e} (lr {lr:e}, gradient norm {:e})",
                    grad.norm()
                )));
            }
        }
        loss_history.push(loss);
        let n = net.n();
        for &(pre, post) in &synapses {
            let w = net.weight(pre, post) - lr * grad.weights[pre * n + post];
            net.set_weight_raw(pre, post, w);
        }
        let gain: Vec<f64> = net
            .input_gain()
            .iter()
            .zip(&grad.input_gain)
            .map(|(g, dg)| g - lr * dg)
            .collect();
        net.set_input_gain(gain.clone())
            .map_err(|_| Error::Divergence(format!("epoch {epoch}: input gain became non-finite")))?;
        gain_history.push(gain);
    }
    Ok(TrainOutcome { net, loss_history, gain_history })
}
