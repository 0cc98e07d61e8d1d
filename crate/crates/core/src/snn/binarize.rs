//! From spike rasters to binary system states and empirical TPMs.

use crate::error::{Error, Result};
use crate::network::Tpm;
use crate::state::{SystemState, MAX_STATE_NODES};

use super::network::SpikeRaster;

/// OR each neuron's spikes over consecutive windows of `bin_width` steps. A trailing
/// partial window is dropped.
pub fn binarize_raster(raster: &SpikeRaster, bin_width: usize) -> Result<Vec<SystemState>> {
    if bin_width == 0 {
        return Err(Error::Input("bin width must be at least one step".into()));
    }
    let n = raster.n();
    if n > MAX_STATE_NODES {
        return Err(Error::capacity(n, MAX_STATE_NODES));
    }
    (0..raster.steps() / bin_width)
        .map(|b| {
            let bits = (0..n).fold(0usize, |acc, i| {
                let fired = (b * bin_width..(b + 1) * bin_width).any(|t| raster.fired(t, i));
                if fired {
                    acc | (1 << i)
                } else {
                    acc
                }
            });
            SystemState::new(n, bits)
        })
        .collect()
}

/// Transition frequencies with additive smoothing:
/// `cond[i][s] = (#(s -> i on) + smoothing) / (#s + 2 smoothing)`, and 0.5 for states
/// that never occur as a predecessor when `smoothing = 0`.
pub fn estimate_tpm(states: &[SystemState], n: usize, smoothing: f64) -> Result<Tpm> {
    if states.len() < 2 {
        return Err(Error::Input("need at least two states to count transitions".into()));
    }
    if !(smoothing >= 0.0 && smoothing.is_finite()) {
        return Err(Error::Input("smoothing must be finite and non-negative".into()));
    }
    if n == 0 || n > MAX_STATE_NODES {
        return Err(Error::capacity(n, MAX_STATE_NODES));
    }
    if let Some((k, s)) = states.iter().enumerate().find(|(_, s)| s.len() != n) {
        return Err(Error::Input(format!("state {k} has {} bits, expected {n}", s.len())));
    }
    let num_states = 1usize << n;
    let mut visits = vec![0u64; num_states];
    let mut on = vec![0u64; num_states * n];
    for pair in states.windows(2) {
        let (from, to) = (pair[0].index(), pair[1].index());
        visits[from] += 1;
        for i in 0..n {
            if (to >> i) & 1 == 1 {
                on[from * n + i] += 1;
            }
        }
    }
    let cond = (0..num_states * n)
        .map(|k| {
            let count = visits[k / n] as f64;
            let denom = count + 2.0 * smoothing;
            if denom == 0.0 {
                0.5
            } else {
                (on[k] as f64 + smoothing) / denom
            }
        })
        .collect();
    Ok(Tpm::from_state_major(n, cond))
}
