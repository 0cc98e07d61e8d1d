//! Cause and effect repertoires under noising of severed inputs.

use serde::{Deserialize, Serialize};

use super::bipartition::full_mask;
use crate::error::{Error, Result};
use crate::network::{check_state, product_distribution, Tpm};
use crate::state::SystemState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RepertoireDirection {
    Cause,
    Effect,
}

/// Distribution over the joint states of the nodes in `over`. Entry `k` is the sub-state
/// whose `j`-th bit is the state of the `j`-th lowest node of `over`.
#[derive(Debug, Clone, PartialEq)]
pub struct Repertoire {
    pub over: u32,
    pub probs: Vec<f64>,
    pub direction: RepertoireDirection,
    /// Cause repertoires only: the conditioning state has zero likelihood under every past
    /// state, so `probs` fell back to uniform.
    pub unreachable: bool,
}

/// Full-state masks for every sub-state index of `mask`.
pub(crate) fn deposit_table(mask: u32) -> Vec<usize> {
    let nodes: Vec<u32> = (0..32).filter(|&i| (mask >> i) & 1 == 1).collect();
    let mut out = vec![0usize; 1 << nodes.len()];
    for (j, &node) in nodes.iter().enumerate() {
        let half = 1 << j;
        for k in 0..half {
            out[k + half] = out[k] | (1 << node);
        }
    }
    out
}

/// Submasks of `mask`, including 0 and `mask` itself.
pub(crate) fn submasks(mask: u32) -> impl Iterator<Item = u32> {
    let mut next = Some(0u32);
    std::iter::from_fn(move || {
        let cur = next?;
        next = if cur == mask { None } else { Some((cur.wrapping_sub(mask)) & mask) };
        Some(cur)
    })
}

fn check_subsets(tpm: &Tpm, s: SystemState, over: u32, noised: u32) -> Result<()> {
    check_state(tpm, s)?;
    let full = full_mask(tpm.n());
    if over == 0 {
        return Err(Error::Input("repertoire over an empty node set".into()));
    }
    if (over | noised) & !full != 0 {
        return Err(Error::Input("repertoire subsets reference nodes outside the system".into()));
    }
    Ok(())
}

/// Effect distribution of `over` given `s` on the non-noised nodes; the current bits of
/// `noised` nodes are replaced by independent fair coins and averaged out.
pub(crate) fn effect_probs(tpm: &Tpm, state: usize, over: u32, noised: u32) -> Vec<f64> {
    let over_nodes: Vec<usize> = (0..tpm.n()).filter(|&i| (over >> i) & 1 == 1).collect();
    let base = state & !(noised as usize);
    let weight = 1.0 / (1u64 << noised.count_ones()) as f64;
    let mut acc = vec![0.0; 1 << over_nodes.len()];
    let mut p_on = vec![0.0; over_nodes.len()];
    for z in submasks(noised) {
        let row = tpm.state_row(base | z as usize);
        for (j, &i) in over_nodes.iter().enumerate() {
            p_on[j] = row[i];
        }
        for (a, p) in acc.iter_mut().zip(product_distribution(&p_on)) {
            *a += weight * p;
        }
    }
    acc
}

/// Posterior over the past of `over` given the current state of the non-noised nodes,
/// uniform prior over all past states. Returns `(probs, unreachable)`.
pub(crate) fn cause_probs(tpm: &Tpm, state: usize, over: u32, noised: u32) -> (Vec<f64>, bool) {
    let n = tpm.n();
    let full = full_mask(n);
    let conditioned: Vec<usize> = (0..n).filter(|&i| ((full & !noised) >> i) & 1 == 1).collect();
    let over_dep = deposit_table(over);
    let rest_dep = deposit_table(full & !over);
    let mut acc = vec![0.0; over_dep.len()];
    for (k, &xo) in over_dep.iter().enumerate() {
        let mut total = 0.0;
        for &xr in &rest_dep {
            let row = tpm.state_row(xo | xr);
            let mut lik = 1.0;
            for &i in &conditioned {
                lik *= if (state >> i) & 1 == 1 { row[i] } else { 1.0 - row[i] };
            }
            total += lik;
        }
        acc[k] = total;
    }
    normalize_or_uniform(acc)
}

pub(crate) fn normalize_or_uniform(mut acc: Vec<f64>) -> (Vec<f64>, bool) {
    let total: f64 = acc.iter().sum();
    if total > 0.0 {
        acc.iter_mut().for_each(|a| *a /= total);
        (acc, false)
    } else {
        let u = 1.0 / acc.len() as f64;
        acc.iter_mut().for_each(|a| *a = u);
        (acc, true)
    }
}

pub fn effect_repertoire(tpm: &Tpm, s: SystemState, over: u32, noised: u32) -> Result<Repertoire> {
    check_subsets(tpm, s, over, noised)?;
    Ok(Repertoire {
        over,
        probs: effect_probs(tpm, s.index(), over, noised),
        direction: RepertoireDirection::Effect,
        unreachable: false,
    })
}

pub fn cause_repertoire(tpm: &Tpm, s: SystemState, over: u32, noised: u32) -> Result<Repertoire> {
    check_subsets(tpm, s, over, noised)?;
    let (probs, unreachable) = cause_probs(tpm, s.index(), over, noised);
    Ok(Repertoire { over, probs, direction: RepertoireDirection::Cause, unreachable })
}
