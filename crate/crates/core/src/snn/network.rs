//! Discrete-time spiking network with delayed delta-current synapses.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::lif::{lif_step, LifParams};
use super::stdp::{stdp_delta, StdpRule};
use crate::error::{Error, Result};
use crate::network::CausalNetwork;

/// LIF neurons connected by weighted, delayed synapses.
///
/// `weights[pre * n + post]` is the current injected into `post` when `pre` spikes, after
/// `delays[pre * n + post]` steps. Synapses with non-zero initial weight are structural;
/// only they carry spikes and only they are plastic.
#[derive(Debug, Clone, PartialEq)]
pub struct SpikingNetwork {
    n: usize,
    params: Vec<LifParams>,
    weights: Vec<f64>,
    delays: Vec<u32>,
    connected: Vec<bool>,
    input_gain: Vec<f64>,
    input_noise: f64,
    allow_self: bool,
    membrane: Vec<f64>,
    refractory_remaining: Vec<u32>,
}

impl SpikingNetwork {
    /// `n` unconnected neurons sharing `params`, at rest.
    pub fn new(n: usize, params: LifParams) -> Result<Self> {
        Self::with_params(vec![params; n])
    }

    pub fn with_params(params: Vec<LifParams>) -> Result<Self> {
        let n = params.len();
        if n == 0 {
            return Err(Error::Config("spiking network needs at least one neuron".into()));
        }
        for (i, p) in params.iter().enumerate() {
            p.validate().map_err(|e| Error::Config(format!("neuron {i}: {e}")))?;
        }
        let dt = params[0].dt;
        if params.iter().any(|p| p.dt != dt) {
            return Err(Error::Config("all neurons must share one integration step dt".into()));
        }
        Ok(Self {
            n,
            membrane: params.iter().map(|p| p.v_rest).collect(),
            refractory_remaining: vec![0; n],
            params,
            weights: vec![0.0; n * n],
            delays: vec![1; n * n],
            connected: vec![false; n * n],
            input_gain: vec![1.0; n],
            input_noise: 0.0,
            allow_self: false,
        })
    }

    /// Synaptic structure taken from a causal graph: each edge becomes a synapse of weight
    /// `weight_scale * w` and the given delay.
    pub fn from_graph(graph: &CausalNetwork, params: LifParams, delay: u32, weight_scale: f64) -> Result<Self> {
        let mut net = Self::new(graph.n(), params)?;
        net.allow_self = graph.edges().iter().any(|e| e.src == e.dst);
        for e in graph.edges() {
            net.connect(e.src, e.dst, weight_scale * e.w, delay)?;
        }
        Ok(net)
    }

    pub fn enable_self_synapses(&mut self, allow: bool) {
        self.allow_self = allow;
    }

    /// Add or replace the synapse `pre -> post`. A zero weight removes it.
    pub fn connect(&mut self, pre: usize, post: usize, weight: f64, delay: u32) -> Result<()> {
        if pre >= self.n || post >= self.n {
            return Err(Error::Config(format!("synapse {pre} -> {post} outside 0..{}", self.n)));
        }
        if pre == post && !self.allow_self && weight != 0.0 {
            return Err(Error::Config(format!("self-synapse on neuron {pre} is not enabled")));
        }
        if !weight.is_finite() {
            return Err(Error::Config(format!("synapse {pre} -> {post} has non-finite weight")));
        }
        if delay < 1 {
            return Err(Error::Config(format!("synapse {pre} -> {post} needs a delay of at least 1 step")));
        }
        let k = pre * self.n + post;
        self.weights[k] = weight;
        self.delays[k] = delay;
        self.connected[k] = weight != 0.0;
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn params(&self) -> &[LifParams] {
        &self.params
    }

    pub fn dt(&self) -> f64 {
        self.params[0].dt
    }

    pub fn weight(&self, pre: usize, post: usize) -> f64 {
        self.weights[pre * self.n + post]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn delay(&self, pre: usize, post: usize) -> u32 {
        self.delays[pre * self.n + post]
    }

    pub fn is_connected(&self, pre: usize, post: usize) -> bool {
        self.connected[pre * self.n + post]
    }

    /// Structural synapses as `(pre, post)` in row-major order.
    pub fn synapses(&self) -> Vec<(usize, usize)> {
        (0..self.n * self.n)
            .filter(|&k| self.connected[k])
            .map(|k| (k / self.n, k % self.n))
            .collect()
    }

    /// Weights of the structural synapses, in [`Self::synapses`] order.
    pub fn synapse_weights(&self) -> Vec<f64> {
        self.synapses().iter().map(|&(p, q)| self.weight(p, q)).collect()
    }

    /// Overwrite structural synapse weights (in [`Self::synapses`] order); structure is kept.
    pub fn set_synapse_weights(&mut self, weights: &[f64]) -> Result<()> {
        let syn = self.synapses();
        if syn.len() != weights.len() {
            return Err(Error::Input(format!("{} weights for {} synapses", weights.len(), syn.len())));
        }
        for (&(p, q), &w) in syn.iter().zip(weights) {
            if !w.is_finite() {
                return Err(Error::Input(format!("non-finite weight for synapse {p} -> {q}")));
            }
            self.weights[p * self.n + q] = w;
        }
        Ok(())
    }

    /// Copy with `round(fraction * synapses)` structural synapses, chosen uniformly by
    /// `seed`, removed.
    pub fn pruned(&self, fraction: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&fraction) {
            return Err(Error::Config(format!("prune fraction {fraction} outside [0, 1]")));
        }
        let mut syn = self.synapses();
        let remove = (fraction * syn.len() as f64).round() as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        syn.shuffle(&mut rng);
        let mut out = self.clone();
        for &(pre, post) in &syn[..remove] {
            let k = pre * self.n + post;
            out.weights[k] = 0.0;
            out.connected[k] = false;
        }
        Ok(out)
    }

    pub(crate) fn set_weight_raw(&mut self, pre: usize, post: usize, w: f64) {
        self.weights[pre * self.n + post] = w;
    }

    pub fn input_gain(&self) -> &[f64] {
        &self.input_gain
    }

    pub fn set_input_gain(&mut self, gain: Vec<f64>) -> Result<()> {
        if gain.len() != self.n || gain.iter().any(|g| !g.is_finite()) {
            return Err(Error::Input("input gain must be n finite values".into()));
        }
        self.input_gain = gain;
        Ok(())
    }

    pub fn input_noise(&self) -> f64 {
        self.input_noise
    }

    /// Standard deviation of i.i.d. Gaussian current added to every neuron at every step.
    pub fn set_input_noise(&mut self, sd: f64) -> Result<()> {
        if !(sd >= 0.0 && sd.is_finite()) {
            return Err(Error::Config("input noise must be a finite non-negative SD".into()));
        }
        self.input_noise = sd;
        Ok(())
    }

    pub fn membrane(&self) -> &[f64] {
        &self.membrane
    }

    pub fn set_membrane(&mut self, v: Vec<f64>) -> Result<()> {
        if v.len() != self.n || v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Input("membrane state must be n finite values".into()));
        }
        self.membrane = v;
        Ok(())
    }

    pub fn refractory_remaining(&self) -> &[u32] {
        &self.refractory_remaining
    }

    /// Membrane to rest, refractory counters cleared.
    pub fn reset_state(&mut self) {
        self.membrane = self.params.iter().map(|p| p.v_rest).collect();
        self.refractory_remaining = vec![0; self.n];
    }

    pub(crate) fn max_delay(&self) -> u32 {
        (0..self.n * self.n)
            .filter(|&k| self.connected[k])
            .map(|k| self.delays[k])
            .max()
            .unwrap_or(1)
    }

    /// Weight matrix as CSV, `n` rows of `n` values (row = presynaptic neuron).
    pub fn weights_csv(&self, fmt_f64: impl Fn(f64) -> String) -> String {
        let mut out = String::new();
        for pre in 0..self.n {
            let row: Vec<String> = (0..self.n).map(|post| fmt_f64(self.weight(pre, post))).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// External current per step and neuron.
#[derive(Debug, Clone, PartialEq)]
pub struct Stimulus {
    steps: usize,
    n: usize,
    currents: Vec<f64>,
}

impl Stimulus {
    pub fn new(steps: usize, n: usize, currents: Vec<f64>) -> Result<Self> {
        if currents.len() != steps * n {
            return Err(Error::Input(format!(
                "stimulus has {} values, expected {steps} x {n}",
                currents.len()
            )));
        }
        if currents.iter().any(|c| !c.is_finite()) {
            return Err(Error::Input("stimulus contains non-finite currents".into()));
        }
        Ok(Self { steps, n, currents })
    }

    pub fn zeros(steps: usize, n: usize) -> Self {
        Self { steps, n, currents: vec![0.0; steps * n] }
    }

    pub fn constant(steps: usize, n: usize, current: f64) -> Self {
        Self { steps, n, currents: vec![current; steps * n] }
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn at(&self, step: usize, neuron: usize) -> f64 {
        self.currents[step * self.n + neuron]
    }

    pub fn set(&mut self, step: usize, neuron: usize, current: f64) {
        self.currents[step * self.n + neuron] = current;
    }

    pub fn add(&mut self, step: usize, neuron: usize, current: f64) {
        self.currents[step * self.n + neuron] += current;
    }

    /// Headerless CSV: one row per step, one column per neuron.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut currents = Vec::new();
        let mut n = None;
        let mut steps = 0;
        for (lineno, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let row = line
                .split(',')
                .map(|f| {
                    f.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Input(format!("stimulus line {}: cannot parse {f:?}", lineno + 1)))
                })
                .collect::<Result<Vec<_>>>()?;
            match n {
                None => n = Some(row.len()),
                Some(width) if width != row.len() => {
                    return Err(Error::Input(format!(
                        "stimulus line {} has {} columns, expected {width}",
                        lineno + 1,
                        row.len()
                    )))
                }
                _ => {}
            }
            currents.extend(row);
            steps += 1;
        }
        let n = n.ok_or_else(|| Error::Input("empty stimulus file".into()))?;
        Self::new(steps, n, currents)
    }
}

/// Binary spike matrix, `steps x n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpikeRaster {
    steps: usize,
    n: usize,
    spikes: Vec<u8>,
}

impl SpikeRaster {
    pub fn empty(steps: usize, n: usize) -> Self {
        Self { steps, n, spikes: vec![0; steps * n] }
    }

    /// `rows[t][i]` non-zero iff neuron `i` fired at step `t`.
    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let n = rows.first().map_or(0, Vec::len);
        let mut raster = Self::empty(rows.len(), n);
        for (t, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Input(format!("raster row {t} has {} entries, expected {n}", row.len())));
            }
            for (i, &b) in row.iter().enumerate() {
                if b != 0 {
                    raster.spikes[t * n + i] = 1;
                }
            }
        }
        Ok(raster)
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn fired(&self, step: usize, neuron: usize) -> bool {
        self.spikes[step * self.n + neuron] != 0
    }

    pub(crate) fn mark(&mut self, step: usize, neuron: usize) {
        self.spikes[step * self.n + neuron] = 1;
    }

    pub fn spike_count(&self, neuron: usize) -> usize {
        (0..self.steps).filter(|&t| self.fired(t, neuron)).count()
    }

    pub fn total_spikes(&self) -> usize {
        self.spikes.iter().map(|&b| b as usize).sum()
    }

    pub fn spike_steps(&self, neuron: usize) -> Vec<usize> {
        (0..self.steps).filter(|&t| self.fired(t, neuron)).collect()
    }

    /// `(step, neuron)` events in step order, then neuron order.
    pub fn events(&self) -> Vec<(usize, usize)> {
        (0..self.steps)
            .flat_map(|t| (0..self.n).filter(move |&i| self.fired(t, i)).map(move |i| (t, i)))
            .collect()
    }

    /// True when no neuron fires twice within its refractory window.
    pub fn respects_refractory(&self, params: &[LifParams]) -> bool {
        (0..self.n).all(|i| {
            let min_gap = params[i].t_ref / params[i].dt;
            self.spike_steps(i).windows(2).all(|w| (w[1] - w[0]) as f64 > min_gap - 1e-9)
        })
    }

    /// CSV of spike events with header `step,neuron`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,neuron\n");
        for (t, i) in self.events() {
            writeln!(out, "{t},{i}").unwrap();
        }
        out
    }
}

/// Seeded i.i.d. Gaussian input noise, `steps x n`, or `None` when the SD is zero.
pub(crate) fn noise_matrix(n: usize, steps: usize, sd: f64, seed: u64) -> Option<Vec<f64>> {
    if sd == 0.0 {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sd).expect("sd validated");
    Some((0..steps * n).map(|_| normal.sample(&mut rng)).collect())
}

fn adjacency(net: &SpikingNetwork) -> (Vec<Vec<usize>>, Vec<Vec<usize>>) {
    let n = net.n;
    let mut out_lists = vec![Vec::new(); n];
    let mut in_lists = vec![Vec::new(); n];
    for pre in 0..n {
        for post in 0..n {
            if net.connected[pre * n + post] {
                out_lists[pre].push(post);
                in_lists[post].push(pre);
            }
        }
    }
    (out_lists, in_lists)
}

/// Simulate `steps` steps from the network's current membrane state.
///
/// Each step: external current (times input gain) plus noise plus synaptic arrivals is
/// integrated by [`lif_step`] for every non-refractory neuron; spikes are scheduled for
/// delivery after the synapse delay. With `stdp`, every post spike pairs with the most
/// recent spike of each presynaptic neuron (potentiation, coincidences included) and every
/// pre spike pairs with the most recent earlier spike of each postsynaptic neuron
/// (depression); weights are clamped to the rule's bounds. Spikes still in flight when the
/// run ends are dropped.
pub fn run(
    net: &mut SpikingNetwork,
    stimulus: &Stimulus,
    steps: usize,
    stdp: Option<&StdpRule>,
    seed: u64,
) -> Result<SpikeRaster> {
    run_observed(net, stimulus, steps, stdp, seed, |_, _, _| {})
}

/// [`run`] with a callback after every step receiving the step index, the membrane
/// potentials and the neurons that fired.
pub(crate) fn run_observed(
    net: &mut SpikingNetwork,
    stimulus: &Stimulus,
    steps: usize,
    stdp: Option<&StdpRule>,
    seed: u64,
    mut observe: impl FnMut(usize, &[f64], &[usize]),
) -> Result<SpikeRaster> {
    if stimulus.steps() != steps || stimulus.n() != net.n {
        return Err(Error::Input(format!(
            "stimulus is {} x {}, expected {steps} x {}",
            stimulus.steps(),
            stimulus.n(),
            net.n
        )));
    }
    if let Some(rule) = stdp {
        rule.validate()?;
        for k in 0..net.n * net.n {
            if net.connected[k] {
                net.weights[k] = rule.clamp(net.weights[k]);
            }
        }
    }
    let n = net.n;
    let dt = net.dt();
    let (out_lists, in_lists) = adjacency(net);
    let ring = net.max_delay() as usize + 1;
    let mut pending = vec![0.0; ring * n];
    let noise = noise_matrix(n, steps, net.input_noise, seed);
    let ref_steps: Vec<u32> = net.params.iter().map(LifParams::refractory_steps).collect();
    let mut last_spike: Vec<Option<f64>> = vec![None; n];
    let mut raster = SpikeRaster::empty(steps, n);
    let mut fired = Vec::with_capacity(n);

    for t in 0..steps {
        let slot = (t % ring) * n;
        fired.clear();
        for i in 0..n {
            let arriving = std::mem::take(&mut pending[slot + i]);
            if net.refractory_remaining[i] > 0 {
                net.refractory_remaining[i] -= 1;
                net.membrane[i] = net.params[i].v_reset;
                continue;
            }
            let mut current = net.input_gain[i] * stimulus.at(t, i) + arriving;
            if let Some(noise) = &noise {
                current += noise[t * n + i];
            }
            let (v, spiked) = lif_step(net.membrane[i], current, &net.params[i]);
            net.membrane[i] = v;
            if spiked {
                net.refractory_remaining[i] = ref_steps[i];
                raster.mark(t, i);
                fired.push(i);
            }
        }
        for &pre in &fired {
            for &post in &out_lists[pre] {
                let k = pre * n + post;
                let at = ((t + net.delays[k] as usize) % ring) * n + post;
                pending[at] += net.weights[k];
            }
        }
        if let Some(rule) = stdp {
            let now = t as f64 * dt;
            for &pre in &fired {
                for &post in &out_lists[pre] {
                    if let Some(t_post) = last_spike[post] {
                        let k = pre * n + post;
                        net.weights[k] = rule.clamp(net.weights[k] + stdp_delta(t_post - now, rule));
                    }
                }
            }
            for &i in &fired {
                last_spike[i] = Some(now);
            }
            for &post in &fired {
                for &pre in &in_lists[post] {
                    if let Some(t_pre) = last_spike[pre] {
                        let k = pre * n + post;
                        net.weights[k] = rule.clamp(net.weights[k] + stdp_delta(now - t_pre, rule));
                    }
                }
            }
        }
        observe(t, &net.membrane, &fired);
    }
    Ok(raster)
}
