//! Networks whose parameters can be tuned toward a Φ target.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{build_tpm, stationary_distribution, CausalNetwork, Tpm};
use crate::snn::{binarize_raster, estimate_tpm, run, SpikingNetwork, StdpRule, Stimulus};
use crate::state::StateDistribution;

/// Fixed protocol turning a model into a TPM and an empirical state distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Measurement {
    /// Spiking models: bin width in steps for binarizing the raster.
    pub bin_width: usize,
    /// Spiking models: additive count smoothing for TPM estimation.
    pub smoothing: f64,
    /// Causal networks: chain length discarded before sampling the stationary distribution.
    pub burn_in: usize,
    /// Causal networks: number of sampled states.
    pub samples: usize,
    pub seed: u64,
}

impl Default for Measurement {
    fn default() -> Self {
        Self { bin_width: 10, smoothing: 1.0, burn_in: 1000, samples: 20_000, seed: 0 }
    }
}

/// Something with a real parameter vector that can be scored by Φ.
pub trait PhiModel: Clone + Send + Sync {
    fn parameters(&self) -> Vec<f64>;

    fn with_parameters(&self, params: &[f64]) -> Result<Self>;

    /// The TPM, plus the empirical state distribution when `empirical` is set.
    fn measure(&self, m: &Measurement, empirical: bool) -> Result<(Tpm, Option<StateDistribution>)>;
}

/// Edge weights are the parameters.
impl PhiModel for CausalNetwork {
    fn parameters(&self) -> Vec<f64> {
        self.edge_weights()
    }

    fn with_parameters(&self, params: &[f64]) -> Result<Self> {
        self.with_edge_weights(params)
    }

    fn measure(&self, m: &Measurement, empirical: bool) -> Result<(Tpm, Option<StateDistribution>)> {
        let tpm = build_tpm(self)?;
        let dist = if empirical { Some(stationary_distribution(&tpm, m.burn_in, m.samples, m.seed)?) } else { None };
        Ok((tpm, dist))
    }
}

/// A spiking network together with the stimulus it is scored under. Structural synapse
/// weights are the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SpikingSubject {
    pub net: SpikingNetwork,
    pub stimulus: Stimulus,
}

impl PhiModel for SpikingSubject {
    fn parameters(&self) -> Vec<f64> {
        self.net.synapse_weights()
    }

    fn with_parameters(&self, params: &[f64]) -> Result<Self> {
        let mut net = self.net.clone();
        net.set_synapse_weights(params)?;
        Ok(Self { net, stimulus: self.stimulus.clone() })
    }

    fn measure(&self, m: &Measurement, empirical: bool) -> Result<(Tpm, Option<StateDistribution>)> {
        let mut net = self.net.clone();
        net.reset_state();
        let raster = run(&mut net, &self.stimulus, self.stimulus.steps(), None, m.seed)?;
        let states = binarize_raster(&raster, m.bin_width)?;
        let n = net.n();
        let tpm = estimate_tpm(&states, n, m.smoothing)?;
        let dist = if empirical {
            let mut counts = vec![0.0; 1 << n];
            states.iter().for_each(|s| counts[s.index()] += 1.0);
            let total = states.len() as f64;
            Some(StateDistribution::new(n, counts.into_iter().map(|c| c / total).collect())?)
        } else {
            None
        };
        Ok((tpm, dist))
    }
}

/// Runs the network under `stimulus` with STDP enabled and returns the plastic result.
pub fn unsupervised_pretrain(
    net: &SpikingNetwork,
    rule: &StdpRule,
    stimulus: &Stimulus,
    steps: usize,
    seed: u64,
) -> Result<SpikingNetwork> {
    rule.validate()?;
    if steps == 0 {
        return Err(Error::Config("pretraining needs at least one step".into()));
    }
    let mut out = net.clone();
    run(&mut out, stimulus, steps, Some(rule), seed)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Edge, Mechanism};
    use crate::snn::LifParams;

    #[test]
    fn causal_parameters_roundtrip() {
        let net = CausalNetwork::new(
            vec![Mechanism::threshold(0.5, Some(4.0)); 2],
            vec![Edge { src: 0, dst: 1, w: 0.3 }, Edge { src: 1, dst: 0, w: -0.2 }],
        )
        .unwrap();
        assert_eq!(net.parameters(), vec![0.3, -0.2]);
        assert_eq!(net.with_parameters(&[1.0, 2.0]).unwrap().parameters(), vec![1.0, 2.0]);
        assert!(net.with_parameters(&[1.0]).is_err());
    }

    #[test]
    fn spiking_measurement_is_deterministic() {
        let mut net = SpikingNetwork::new(3, LifParams::default()).unwrap();
        net.connect(0, 1, 30.0, 2).unwrap();
        net.connect(1, 2, 30.0, 2).unwrap();
        net.set_input_noise(2.0).unwrap();
        let subject = SpikingSubject { net, stimulus: Stimulus::constant(3000, 3, 1.0) };
        let m = Measurement::default();
        let (a, da) = subject.measure(&m, true).unwrap();
        let (b, db) = subject.measure(&m, true).unwrap();
        assert_eq!(a, b);
        assert_eq!(da, db);
        assert_eq!(a.n(), 3);
        let sum: f64 = da.unwrap().probs().iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_stimulus_pretraining_keeps_weights() {
        let mut net = SpikingNetwork::new(2, LifParams::default()).unwrap();
        net.connect(0, 1, 0.5, 1).unwrap();
        let out = unsupervised_pretrain(&net, &StdpRule::default(), &Stimulus::zeros(200, 2), 200, 0).unwrap();
        assert_eq!(out.weights(), net.weights());
    }
}
