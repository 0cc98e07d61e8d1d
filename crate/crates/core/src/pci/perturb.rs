//! Perturb-and-record protocol and baseline-referenced binarization.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::lz::{normalized_lz, PciResult};
use crate::error::{Error, Result};
use crate::snn::{run_observed, SpikingNetwork, Stimulus};

/// Default binarization threshold in baseline standard deviations.
pub const DEFAULT_K: f64 = 3.0;

const MIN_BASELINE_STEPS: usize = 10;

/// What a channel reports at each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    /// Membrane potential after the step.
    Membrane,
    /// Exponential trace of the spike train, time constant 5 steps.
    #[default]
    SmoothedRate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSpec {
    pub target_neurons: Vec<usize>,
    pub amplitude: f64,
    /// Pulse onset relative to the start of the response window.
    #[serde(default)]
    pub onset_step: usize,
    pub duration_steps: usize,
    pub trials: usize,
    pub baseline_steps: usize,
    pub response_steps: usize,
    /// Tonic current into every neuron throughout the trial.
    #[serde(default)]
    pub background: f64,
    #[serde(default)]
    pub activation: Activation,
}

impl PerturbationSpec {
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.trials < 1 {
            return Err(Error::Config("perturbation needs at least one trial".into()));
        }
        if self.baseline_steps < MIN_BASELINE_STEPS {
            return Err(Error::Config(format!(
                "baseline of {} steps is shorter than {MIN_BASELINE_STEPS}",
                self.baseline_steps
            )));
        }
        if self.duration_steps < 1 {
            return Err(Error::Config("pulse duration must be at least one step".into()));
        }
        if self.response_steps < 1 {
            return Err(Error::Config("response window must be at least one step".into()));
        }
        if !self.amplitude.is_finite() || !self.background.is_finite() {
            return Err(Error::Config("pulse amplitude and background must be finite".into()));
        }
        if let Some(&bad) = self.target_neurons.iter().find(|&&i| i >= n) {
            return Err(Error::Input(format!("target neuron {bad} outside 0..{n}")));
        }
        Ok(())
    }

    fn stimulus(&self, n: usize) -> Stimulus {
        let total = self.baseline_steps + self.response_steps;
        let mut stim = Stimulus::constant(total, n, self.background);
        let start = self.baseline_steps + self.onset_step;
        for t in start..(start + self.duration_steps).min(total) {
            for &i in &self.target_neurons {
                stim.add(t, i, self.amplitude);
            }
        }
        stim
    }
}

/// Recorded activations, laid out `[trial][step][channel]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseMatrix {
    trials: usize,
    baseline_steps: usize,
    response_steps: usize,
    n: usize,
    baseline: Vec<f64>,
    response: Vec<f64>,
}

impl ResponseMatrix {
    pub fn new(
        trials: usize,
        baseline_steps: usize,
        response_steps: usize,
        n: usize,
        baseline: Vec<f64>,
        response: Vec<f64>,
    ) -> Result<Self> {
        if trials == 0 || n == 0 || baseline_steps == 0 || response_steps == 0 {
            return Err(Error::Input("response matrix dimensions must be positive".into()));
        }
        if baseline.len() != trials * baseline_steps * n || response.len() != trials * response_steps * n {
            return Err(Error::Input("response matrix data does not match its dimensions".into()));
        }
        if baseline.iter().chain(&response).any(|x| !x.is_finite()) {
            return Err(Error::Input("response matrix has non-finite entries".into()));
        }
        Ok(Self { trials, baseline_steps, response_steps, n, baseline, response })
    }

    pub fn trials(&self) -> usize {
        self.trials
    }

    pub fn baseline_steps(&self) -> usize {
        self.baseline_steps
    }

    pub fn response_steps(&self) -> usize {
        self.response_steps
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn baseline(&self, trial: usize, step: usize, channel: usize) -> f64 {
        self.baseline[(trial * self.baseline_steps + step) * self.n + channel]
    }

    pub fn response(&self, trial: usize, step: usize, channel: usize) -> f64 {
        self.response[(trial * self.response_steps + step) * self.n + channel]
    }
}

fn record_trial(net: &SpikingNetwork, spec: &PerturbationSpec, stim: &Stimulus, seed: u64, trial: usize) -> Result<Vec<f64>> {
    let n = net.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    let mut net = net.clone();
    net.reset_state();
    let v0 = net.params().iter().map(|p| rng.random_range(p.v_reset..p.v_th)).collect();
    net.set_membrane(v0)?;
    let run_seed: u64 = rng.random();
    let steps = stim.steps();
    let mut out = vec![0.0; steps * n];
    let decay = (-1.0f64 / 5.0).exp();
    let mut trace = vec![0.0; n];
    let mut spiked = vec![false; n];
    run_observed(&mut net, stim, steps, None, run_seed, |t, v, fired| {
        let row = &mut out[t * n..(t + 1) * n];
        match spec.activation {
            Activation::Membrane => row.copy_from_slice(v),
            Activation::SmoothedRate => {
                spiked.iter_mut().for_each(|s| *s = false);
                fired.iter().for_each(|&i| spiked[i] = true);
                for i in 0..n {
                    trace[i] = decay * trace[i] + if spiked[i] { 1.0 - decay } else { 0.0 };
                }
                row.copy_from_slice(&trace);
            }
        }
    })?;
    Ok(out)
}

/// Runs `spec.trials` independent trials, each from a seeded random membrane state in
/// `[v_reset, v_th)`. Trials run in parallel and are collected in index order.
pub fn perturb_and_record(net: &SpikingNetwork, spec: &PerturbationSpec, seed: u64) -> Result<ResponseMatrix> {
    let n = net.n();
    spec.validate(n)?;
    let stim = spec.stimulus(n);
    let trials: Vec<Vec<f64>> = (0..spec.trials)
        .into_par_iter()
        .map(|trial| record_trial(net, spec, &stim, seed, trial))
        .collect::<Result<_>>()?;
    let split = spec.baseline_steps * n;
    let mut baseline = Vec::with_capacity(spec.trials * split);
    let mut response = Vec::with_capacity(spec.trials * spec.response_steps * n);
    for t in &trials {
        baseline.extend_from_slice(&t[..split]);
        response.extend_from_slice(&t[split..]);
    }
    ResponseMatrix::new(spec.trials, spec.baseline_steps, spec.response_steps, n, baseline, response)
}

/// Thresholded responses, laid out `[step][channel]` (per trial: `[trial][step][channel]`).
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryResponse {
    pub steps: usize,
    pub n: usize,
    pub trials: usize,
    pub k: f64,
    /// Trial-mean deviations beyond `k` baseline SDs.
    pub significance: Vec<u8>,
    /// Single-trial deviations beyond `k` baseline SDs.
    pub per_trial: Vec<u8>,
}

impl BinaryResponse {
    pub fn at(&self, step: usize, channel: usize) -> u8 {
        self.significance[step * self.n + channel]
    }

    pub fn ones(&self) -> usize {
        self.significance.iter().filter(|&&b| b != 0).count()
    }

    /// Significance matrix flattened channel by channel.
    pub fn channel_major(&self) -> Vec<u8> {
        (0..self.n)
            .flat_map(|c| (0..self.steps).map(move |t| self.significance[t * self.n + c]))
            .collect()
    }

    /// Per-trial matrices flattened channel by channel, trials in index order.
    pub fn trials_channel_major(&self) -> Vec<u8> {
        let block = self.steps * self.n;
        (0..self.trials)
            .flat_map(|r| {
                (0..self.n).flat_map(move |c| (0..self.steps).map(move |t| self.per_trial[r * block + t * self.n + c]))
            })
            .collect()
    }

    /// CSV with one row per step and one column per channel, no header.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.steps * (2 * self.n));
        for t in 0..self.steps {
            let row: Vec<&str> = (0..self.n).map(|c| if self.at(t, c) != 0 { "1" } else { "0" }).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

fn mean_sd(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let (count, sum) = values.clone().fold((0usize, 0.0), |(c, s), x| (c + 1, s + x));
    let mean = sum / count as f64;
    let var = values.map(|x| (x - mean).powi(2)).sum::<f64>() / count as f64;
    (mean, var.sqrt())
}

/// Per-channel baseline mean and SD pooled over trials and baseline steps. Channels with
/// zero baseline variance use the SD of all baseline values.
pub fn baseline_statistics(resp: &ResponseMatrix) -> (Vec<f64>, Vec<f64>) {
    let (_, global_sd) = mean_sd(resp.baseline.iter().copied());
    let n = resp.n;
    let (mut means, mut sds) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for c in 0..n {
        let (m, sd) = mean_sd(resp.baseline.iter().skip(c).step_by(n).copied());
        means.push(m);
        sds.push(if sd > 0.0 { sd } else { global_sd });
    }
    (means, sds)
}

/// Marks cells whose activation deviates from the channel's baseline mean by more than
/// `k` baseline SDs. `k` may be infinite.
pub fn binarize_responses(resp: &ResponseMatrix, k: f64) -> Result<BinaryResponse> {
    if !(k > 0.0) {
        return Err(Error::Config(format!("binarization threshold k must be positive, got {k}")));
    }
    let (means, sds) = baseline_statistics(resp);
    let (n, steps, trials) = (resp.n, resp.response_steps, resp.trials);
    let exceeds = |x: f64, c: usize| ((x - means[c]).abs() > k * sds[c]) as u8;
    let mut significance = vec![0u8; steps * n];
    for t in 0..steps {
        for c in 0..n {
            let mean = (0..trials).map(|r| resp.response(r, t, c)).sum::<f64>() / trials as f64;
            significance[t * n + c] = exceeds(mean, c);
        }
    }
    let per_trial = (0..trials * steps * n).map(|idx| exceeds(resp.response[idx], idx % n)).collect();
    Ok(BinaryResponse { steps, n, trials, k, significance, per_trial })
}

/// Normalized LZ76 complexity of the significance matrix flattened channel by channel.
pub fn pci(binary: &BinaryResponse) -> Result<PciResult> {
    let mut r = normalized_lz(&binary.channel_major())?;
    r.k = Some(binary.k);
    Ok(r)
}

/// As [`pci`] but over the concatenated single-trial matrices.
pub fn pci_trials(binary: &BinaryResponse) -> Result<PciResult> {
    let mut r = normalized_lz(&binary.trials_channel_major())?;
    r.k = Some(binary.k);
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::snn::LifParams;

    fn spec(targets: Vec<usize>, amplitude: f64) -> PerturbationSpec {
        PerturbationSpec {
            target_neurons: targets,
            amplitude,
            onset_step: 5,
            duration_steps: 20,
            trials: 8,
            baseline_steps: 200,
            response_steps: 100,
            background: 0.5,
            activation: Activation::Membrane,
        }
    }

    fn noisy_net(n: usize) -> SpikingNetwork {
        let mut net = SpikingNetwork::new(n, LifParams::default()).unwrap();
        net.set_input_noise(0.3).unwrap();
        net
    }

    #[test]
    fn null_pulse_is_insignificant() {
        let net = noisy_net(4);
        let resp = perturb_and_record(&net, &spec(vec![0, 1], 0.0), 5).unwrap();
        let bin = binarize_responses(&resp, 3.0).unwrap();
        assert_eq!(bin.ones(), 0);
        assert_eq!(pci(&bin).unwrap().pci, 0.0);
    }

    #[test]
    fn pulse_to_isolated_neuron_marks_only_its_channel() {
        let net = noisy_net(3);
        let resp = perturb_and_record(&net, &spec(vec![1], 30.0), 2).unwrap();
        let bin = binarize_responses(&resp, 3.0).unwrap();
        let channels: Vec<usize> = (0..3).filter(|&c| (0..bin.steps).any(|t| bin.at(t, c) == 1)).collect();
        assert_eq!(channels, vec![1]);
    }

    #[test]
    fn recording_is_deterministic() {
        let mut net = noisy_net(6);
        net.connect(0, 1, 0.8, 2).unwrap();
        let sp = spec(vec![0], 5.0);
        assert_eq!(perturb_and_record(&net, &sp, 11).unwrap(), perturb_and_record(&net, &sp, 11).unwrap());
        assert_ne!(perturb_and_record(&net, &sp, 11).unwrap(), perturb_and_record(&net, &sp, 12).unwrap());
    }

    #[test]
    fn validation() {
        let net = noisy_net(3);
        assert!(perturb_and_record(&net, &spec(vec![3], 1.0), 0).is_err());
        let short = PerturbationSpec { baseline_steps: 5, ..spec(vec![0], 1.0) };
        assert!(perturb_and_record(&net, &short, 0).is_err());
        let none = PerturbationSpec { trials: 0, ..spec(vec![0], 1.0) };
        assert!(perturb_and_record(&net, &none, 0).is_err());
    }

    fn synthetic(step_block: bool) -> ResponseMatrix {
        // two channels, baseline alternates +-1 around 0 (SD 1)
        let (trials, b, r, n) = (2, 10, 12, 2);
        let baseline: Vec<f64> = (0..trials * b * n).map(|i| if (i / n) % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let mut response = vec![0.0; trials * r * n];
        if step_block {
            for trial in 0..trials {
                for t in 3..8 {
                    response[(trial * r + t) * n + 1] = 10.0;
                }
            }
        }
        ResponseMatrix::new(trials, b, r, n, baseline, response).unwrap()
    }

    #[test]
    fn stepped_channel_sets_its_block() {
        let bin = binarize_responses(&synthetic(true), 3.0).unwrap();
        let ones: Vec<(usize, usize)> =
            (0..12).flat_map(|t| (0..2).map(move |c| (t, c))).filter(|&(t, c)| bin.at(t, c) == 1).collect();
        assert_eq!(ones, (3..8).map(|t| (t, 1)).collect::<Vec<_>>());
        assert_eq!(bin.per_trial.iter().filter(|&&b| b == 1).count(), 10);
    }

    #[test]
    fn baseline_like_response_and_infinite_k_are_all_zero() {
        assert_eq!(binarize_responses(&synthetic(false), 3.0).unwrap().ones(), 0);
        assert_eq!(binarize_responses(&synthetic(true), f64::INFINITY).unwrap().ones(), 0);
        assert!(binarize_responses(&synthetic(true), 0.0).is_err());
        assert!(binarize_responses(&synthetic(true), f64::NAN).is_err());
    }

    #[test]
    fn flat_channel_falls_back_to_global_sd() {
        let (b, r, n) = (10, 4, 2);
        // channel 0 flat at 0, channel 1 alternating +-2
        let baseline: Vec<f64> =
            (0..b * n).map(|i| if i % n == 0 { 0.0 } else if (i / n) % 2 == 0 { 2.0 } else { -2.0 }).collect();
        let (_, sds) = baseline_statistics(&ResponseMatrix::new(1, b, r, n, baseline.clone(), vec![0.0; r * n]).unwrap());
        assert_eq!(sds[1], 2.0);
        assert!((sds[0] - 2.0f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn csv_layout() {
        let bin = binarize_responses(&synthetic(true), 3.0).unwrap();
        let csv = bin.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 12);
        assert_eq!(lines[3], "0,1");
        assert_eq!(lines[0], "0,0");
    }
}
