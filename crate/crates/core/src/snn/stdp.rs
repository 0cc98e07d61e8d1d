//! Pair-based spike-timing-dependent plasticity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StdpRule {
    pub a_plus: f64,
    pub a_minus: f64,
    /// ms
    pub tau_plus: f64,
    /// ms
    pub tau_minus: f64,
    pub w_min: f64,
    pub w_max: f64,
}

impl Default for StdpRule {
    fn default() -> Self {
        Self {
            a_plus: 0.01,
            a_minus: 0.012,
            tau_plus: 20.0,
            tau_minus: 20.0,
            w_min: 0.0,
            w_max: 1.0,
        }
    }
}

impl StdpRule {
    pub fn validate(&self) -> Result<()> {
        if !(self.a_plus >= 0.0 && self.a_minus >= 0.0) {
            return Err(Error::Config("STDP amplitudes must be non-negative".into()));
        }
        if !(self.tau_plus > 0.0 && self.tau_minus > 0.0) {
            return Err(Error::Config("STDP decay constants must be positive".into()));
        }
        if !(self.w_min < self.w_max) {
            return Err(Error::Config("STDP requires w_min < w_max".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn clamp(&self, w: f64) -> f64 {
        w.clamp(self.w_min, self.w_max)
    }
}

/// Weight change for a spike pair separated by `dt_spike = t_post - t_pre` (ms).
/// Coincident spikes potentiate by the full `a_plus`.
#[inline]
pub fn stdp_delta(dt_spike: f64, rule: &StdpRule) -> f64 {
    if dt_spike >= 0.0 {
        rule.a_plus * (-dt_spike / rule.tau_plus).exp()
    } else {
        -rule.a_minus * (dt_spike / rule.tau_minus).exp()
    }
}
