//! Experiment configuration. One JSON file, one optional block per command, unknown keys
//! rejected everywhere.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use ncac_core::adaptation::{LossSpec, Measurement, OptimizerConfig, PhiTarget};
use ncac_core::pci::{PerturbationSpec, DEFAULT_K};
use ncac_core::phi::{PhiConfig, WeightingKind};
use ncac_core::snn::{LifParams, StdpRule};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Run seed; `--seed` takes precedence.
    pub seed: Option<u64>,
    /// Output directory relative to the config file; `--out` takes precedence.
    pub out_dir: Option<String>,
    pub simulate: Option<SimulateConfig>,
    pub phi: Option<PhiCommand>,
    pub pci: Option<PciCommand>,
    pub adapt: Option<AdaptCommand>,
    pub report: Option<ReportCommand>,
}

/// A spiking network. Structure comes from an explicit synapse list, a seeded random
/// wiring, a causal graph, or any mix of them.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpikingSpec {
    /// Neuron count; taken from `graph` when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default)]
    pub params: LifParams,
    #[serde(default)]
    pub synapses: Vec<SynapseSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random: Option<RandomWiring>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph: Option<GraphWiring>,
    #[serde(default)]
    pub input_noise: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_gain: Option<Vec<f64>>,
    #[serde(default)]
    pub allow_self: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynapseSpec {
    pub pre: usize,
    pub post: usize,
    pub w: f64,
    #[serde(default = "one")]
    pub delay: u32,
}

fn one() -> u32 {
    1
}

/// Each ordered pair `pre != post` is connected with probability `p`, delay uniform in
/// `delays` and weight `weight * U(jitter)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomWiring {
    pub p: f64,
    pub weight: f64,
    #[serde(default = "default_jitter")]
    pub jitter: [f64; 2],
    #[serde(default = "default_delays")]
    pub delays: [u32; 2],
    #[serde(default)]
    pub seed: u64,
}

fn default_jitter() -> [f64; 2] {
    [0.5, 1.5]
}

fn default_delays() -> [u32; 2] {
    [1, 20]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphWiring {
    /// Causal network file path or inline object.
    pub network: Value,
    #[serde(default = "one")]
    pub delay: u32,
    #[serde(default = "unit")]
    pub weight_scale: f64,
}

fn unit() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    /// [`SpikingSpec`] file path or inline object.
    pub network: Value,
    /// Defaults to the stimulus length when the stimulus is a file.
    pub steps: Option<usize>,
    /// A constant current, a CSV path, or absent for no input.
    #[serde(default)]
    pub stimulus: Value,
    #[serde(default = "default_bin")]
    pub bin_width: usize,
    pub stdp: Option<StdpRule>,
}

fn default_bin() -> usize {
    10
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhiCommand {
    /// Causal network file path or inline object.
    pub network: Option<Value>,
    /// TPM CSV path, as an alternative to `network`.
    pub tpm: Option<String>,
    /// Little-endian state index or a bit array.
    pub state: Option<Value>,
    /// Also compute Φ̄ under this weighting.
    pub average: Option<WeightingKind>,
    #[serde(default)]
    pub options: PhiConfig,
    #[serde(default)]
    pub measurement: Measurement,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PciCommand {
    pub network: Value,
    pub perturbation: PerturbationSpec,
    #[serde(default = "default_k")]
    pub k: f64,
    pub ordering: Option<OrderingSpec>,
}

fn default_k() -> f64 {
    DEFAULT_K
}

/// Coupled network versus its pruned counterpart over a list of seeds. Each seed is the
/// random-wiring seed, the perturbation seed, and (plus `prune_seed_offset`) the pruning seed.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrderingSpec {
    pub seeds: Vec<u64>,
    #[serde(default = "default_prune")]
    pub prune_fraction: f64,
    #[serde(default = "default_offset")]
    pub prune_seed_offset: u64,
}

fn default_prune() -> f64 {
    0.9
}

fn default_offset() -> u64 {
    1000
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdaptCommand {
    /// Causal network to adapt (edge weights).
    pub network: Option<Value>,
    /// Spiking network to adapt (synapse weights), as an alternative to `network`.
    pub spiking: Option<SpikingModel>,
    pub target: PhiTarget,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub loss: LossSpec,
    #[serde(default)]
    pub phi: PhiConfig,
    #[serde(default)]
    pub measurement: Measurement,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpikingModel {
    pub network: Value,
    #[serde(default)]
    pub stimulus: Value,
    pub steps: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportCommand {
    /// Output directories of earlier runs, relative to the config file.
    #[serde(default)]
    pub runs: Vec<String>,
}
