//! Spiking-network simulation: LIF dynamics, STDP, surrogate-gradient rate training and
//! the bridge from rasters to binary states.

mod binarize;
mod lif;
mod network;
mod stdp;
mod surrogate;

pub use binarize::{binarize_raster, estimate_tpm};
pub use lif::{lif_step, LifParams};
pub(crate) use network::run_observed;
pub use network::{run, SpikeRaster, SpikingNetwork, Stimulus};
pub use stdp::{stdp_delta, StdpRule};
pub use surrogate::{
    rate_loss_and_gradient, relaxed_rates, smoothed_rate_loss, train_rate_match, RateGradient, SurrogateShape,
    SurrogateSpec, TrainOutcome,
};
