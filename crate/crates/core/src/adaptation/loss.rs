//! The Φ-gap loss between a model and exogenous Φ targets.

use serde::{Deserialize, Serialize};

use super::model::{Measurement, PhiModel};
use crate::error::{Error, Result};
use crate::phi::{find_mip, phi_mean, PhiConfig, Weighting, WeightingKind};
use crate::state::SystemState;

/// Where a target Φ is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetAt {
    /// A single state, by little-endian index.
    State(usize),
    /// Φ̄ under the given weighting.
    Averaged(WeightingKind),
}

fn unit_weight() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetEntry {
    #[serde(flatten)]
    pub at: TargetAt,
    pub phi_star: f64,
    #[serde(default = "unit_weight")]
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PhiTarget {
    pub targets: Vec<TargetEntry>,
}

impl PhiTarget {
    pub fn single(at: TargetAt, phi_star: f64) -> Self {
        Self { targets: vec![TargetEntry { at, phi_star, weight: 1.0 }] }
    }

    pub fn validate(&self) -> Result<()> {
        if self.targets.is_empty() {
            return Err(Error::Config("Φ target list is empty".into()));
        }
        for (k, t) in self.targets.iter().enumerate() {
            if !(t.phi_star >= 0.0 && t.phi_star.is_finite()) {
                return Err(Error::Config(format!("target {k}: phi_star must be finite and non-negative")));
            }
            if !(t.weight > 0.0 && t.weight.is_finite()) {
                return Err(Error::Config(format!("target {k}: weight must be positive")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossForm {
    #[default]
    Absolute,
    Squared,
}

/// Per-target gaps are combined by weighted mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossSpec {
    pub form: LossForm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossValue {
    pub loss: f64,
    /// Model Φ for each target, in target order.
    pub phis: Vec<f64>,
}

impl LossValue {
    /// Weighted mean of the model Φ values.
    pub fn mean_phi(&self, target: &PhiTarget) -> f64 {
        let total: f64 = target.targets.iter().map(|t| t.weight).sum();
        target.targets.iter().zip(&self.phis).map(|(t, p)| t.weight * p).sum::<f64>() / total
    }
}

/// Weighted mean of `|Φ - Φ*|` or `(Φ - Φ*)^2` over the targets.
pub fn ncac_loss<M: PhiModel>(
    model: &M,
    target: &PhiTarget,
    spec: &LossSpec,
    phi_config: &PhiConfig,
    measurement: &Measurement,
) -> Result<LossValue> {
    target.validate()?;
    let empirical = target.targets.iter().any(|t| t.at == TargetAt::Averaged(WeightingKind::Empirical));
    let any_averaged = target.targets.iter().any(|t| matches!(t.at, TargetAt::Averaged(_)));
    let (tpm, dist) = model.measure(measurement, empirical)?;
    let n = tpm.n();
    // one sweep over every state serves all averaged and single-state targets
    let uniform = if any_averaged { Some(phi_mean(&tpm, &Weighting::Uniform, phi_config)?) } else { None };
    let mut phis = Vec::with_capacity(target.targets.len());
    for t in &target.targets {
        let phi = match (t.at, &uniform) {
            (TargetAt::State(s), Some(all)) => {
                SystemState::new(n, s)?;
                all.per_state[s].1
            }
            (TargetAt::State(s), None) => find_mip(&tpm, SystemState::new(n, s)?, phi_config)?.phi,
            (TargetAt::Averaged(WeightingKind::Uniform), Some(all)) => all.phi_bar,
            (TargetAt::Averaged(WeightingKind::Empirical), Some(all)) => {
                let d = dist.as_ref().expect("empirical distribution was requested");
                all.per_state.iter().zip(d.probs()).map(|((_, phi), w)| phi * w).sum()
            }
            (TargetAt::Averaged(_), None) => unreachable!("averaged targets trigger the full sweep"),
        };
        phis.push(phi);
    }
    let total: f64 = target.targets.iter().map(|t| t.weight).sum();
    let loss = target
        .targets
        .iter()
        .zip(&phis)
        .map(|(t, phi)| {
            let gap = phi - t.phi_star;
            t.weight
                * match spec.form {
                    LossForm::Absolute => gap.abs(),
                    LossForm::Squared => gap * gap,
                }
        })
        .sum::<f64>()
        / total;
    Ok(LossValue { loss, phis })
}
