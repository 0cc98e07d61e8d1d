//! Integrated-information and perturbational-complexity tooling for small causal and
//! spiking networks.
//!
//! * [`network`]: causal networks of logic and threshold gates and their TPMs
//! * [`snn`]: LIF simulation, STDP, surrogate-gradient rate training, raster binarization
//! * [`phi`]: exhaustive Φ over bipartitions and state-averaged Φ̄
//! * [`pci`]: perturb, binarize and compress into a complexity index
//! * [`adaptation`]: gradient-free tuning of weights toward Φ targets
//! * [`export`]: rounded, reproducible JSON and CSV output

pub mod adaptation;
pub mod error;
pub mod export;
pub mod network;
pub mod pci;
pub mod phi;
pub mod snn;
pub mod state;

pub use error::{Error, Result};
pub use network::{
    build_tpm, joint_row, node_degree, sample_next, sample_trajectory, stationary_distribution,
    stationary_distribution_from, CausalNetwork, Edge, GateKind, Mechanism, NetworkFile, NodeId, NodeSpec, Tpm,
};
pub use state::{StateDistribution, SystemState, MAX_STATE_NODES};
