//! Effective information across cuts, MIP search and state-averaged Φ.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bipartition::{enumerate_bipartitions, full_mask, Bipartition};
use super::metric::Metric;
use super::repertoire::{cause_probs, deposit_table, effect_probs, RepertoireDirection};
use crate::error::{Error, Result};
use crate::network::{check_state, product_distribution, Tpm};
use crate::state::{StateDistribution, SystemState};

/// Default node cap for exhaustive Φ.
pub const DEFAULT_MAX_NODES: usize = 16;
/// Cuts whose normalized ei lies within this of the minimum count as tied.
pub const MIP_TIE_TOLERANCE: f64 = 1e-10;
/// Largest system for which every partition's ei is kept in the result.
pub const PER_PARTITION_LIMIT: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Cause,
    Effect,
    /// Both directions searched independently; the smaller Φ is reported.
    #[default]
    Min,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Cause => "cause",
            Direction::Effect => "effect",
            Direction::Min => "min",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhiConfig {
    pub direction: Direction,
    pub metric: Metric,
    pub max_nodes: usize,
    /// Evaluate cuts on the rayon pool. Output is identical either way.
    pub parallel: bool,
}

impl Default for PhiConfig {
    fn default() -> Self {
        Self { direction: Direction::Min, metric: Metric::Kl, max_nodes: DEFAULT_MAX_NODES, parallel: true }
    }
}

impl PhiConfig {
    pub fn with_direction(direction: Direction) -> Self {
        Self { direction, ..Self::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionEi {
    pub cut: Bipartition,
    pub ei: f64,
    pub nei: f64,
}

/// MIP search in a single direction.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionalPhi {
    pub direction: RepertoireDirection,
    pub phi: f64,
    pub mip: Bipartition,
    pub ei: f64,
    pub nei: f64,
    pub per_partition: Vec<PartitionEi>,
    /// Some cause repertoire conditioned on a zero-likelihood state.
    pub unreachable: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhiResult {
    pub phi: f64,
    /// `None` only for systems with fewer than two nodes.
    pub mip: Option<Bipartition>,
    pub per_partition: Vec<PartitionEi>,
    pub state: SystemState,
    pub direction: Direction,
    pub cause: Option<DirectionalPhi>,
    pub effect: Option<DirectionalPhi>,
    pub unreachable: bool,
}

/// Precomputed whole-system repertoires for one state.
struct StateContext<'a> {
    tpm: &'a Tpm,
    state: usize,
    whole_effect: Vec<f64>,
    whole_cause: Vec<f64>,
    whole_unreachable: bool,
}

impl<'a> StateContext<'a> {
    fn new(tpm: &'a Tpm, state: usize, dir: RepertoireDirection) -> Self {
        let full = full_mask(tpm.n());
        let (whole_effect, whole_cause, whole_unreachable) = match dir {
            RepertoireDirection::Effect => (product_distribution(tpm.state_row(state)), Vec::new(), false),
            RepertoireDirection::Cause => {
                let (c, u) = cause_probs(tpm, state, full, 0);
                (Vec::new(), c, u)
            }
        };
        Self { tpm, state, whole_effect, whole_cause, whole_unreachable }
    }

    /// Returns `(ei, unreachable)` for one cut.
    fn cut_ei(&self, cut: Bipartition, dir: RepertoireDirection, metric: Metric) -> (f64, bool) {
        let (a, b) = (cut.part_a(), cut.part_b());
        let (pa, pb, unreachable, whole) = match dir {
            RepertoireDirection::Effect => {
                let pa = effect_probs(self.tpm, self.state, a, b);
                let pb = effect_probs(self.tpm, self.state, b, a);
                (pa, pb, false, &self.whole_effect)
            }
            RepertoireDirection::Cause => {
                let (pa, ua) = cause_probs(self.tpm, self.state, a, b);
                let (pb, ub) = cause_probs(self.tpm, self.state, b, a);
                (pa, pb, ua || ub || self.whole_unreachable, &self.whole_cause)
            }
        };
        let product = join_parts(a, &pa, b, &pb);
        (metric.distance(whole, &product), unreachable)
    }
}

/// Full-space distribution `P(x) = pa(x_A) * pb(x_B)`.
fn join_parts(a: u32, pa: &[f64], b: u32, pb: &[f64]) -> Vec<f64> {
    let da = deposit_table(a);
    let db = deposit_table(b);
    let mut out = vec![0.0; da.len() * db.len()];
    for (i, &xa) in da.iter().enumerate() {
        for (j, &xb) in db.iter().enumerate() {
            out[xa | xb] = pa[i] * pb[j];
        }
    }
    out
}

fn check_capacity(n: usize, cap: usize) -> Result<()> {
    if n > cap || n > 31 {
        return Err(Error::capacity(n, cap));
    }
    Ok(())
}

fn check_cut(tpm: &Tpm, cut: Bipartition) -> Result<()> {
    if cut.part_a() | cut.part_b() != full_mask(tpm.n()) {
        return Err(Error::Input(format!("cut {cut} does not cover the {} nodes of the TPM", tpm.n())));
    }
    Ok(())
}

fn single_directions(direction: Direction) -> &'static [RepertoireDirection] {
    match direction {
        Direction::Cause => &[RepertoireDirection::Cause],
        Direction::Effect => &[RepertoireDirection::Effect],
        Direction::Min => &[RepertoireDirection::Cause, RepertoireDirection::Effect],
    }
}

/// `(ei, ei / min(|A|, |B|))` across `cut`. With [`Direction::Min`] the smaller of the
/// cause and effect values is returned.
pub fn effective_information(
    tpm: &Tpm,
    s: SystemState,
    cut: Bipartition,
    direction: Direction,
    metric: Metric,
) -> Result<(f64, f64)> {
    check_state(tpm, s)?;
    check_cut(tpm, cut)?;
    let ei = single_directions(direction)
        .iter()
        .map(|&d| StateContext::new(tpm, s.index(), d).cut_ei(cut, d, metric).0)
        .fold(f64::INFINITY, f64::min);
    Ok((ei, ei / cut.min_size() as f64))
}

/// Among cuts within [`MIP_TIE_TOLERANCE`] of the minimum nei, the one with the least raw ei;
/// remaining ties go to the lowest mask.
fn select_mip(evals: &[PartitionEi]) -> usize {
    let best = evals.iter().map(|e| e.nei).fold(f64::INFINITY, f64::min);
    let tied = |e: &PartitionEi| e.nei <= best + MIP_TIE_TOLERANCE;
    let least_ei = evals.iter().filter(|e| tied(e)).map(|e| e.ei).fold(f64::INFINITY, f64::min);
    evals
        .iter()
        .position(|e| tied(e) && e.ei <= least_ei + MIP_TIE_TOLERANCE)
        .expect("at least one cut")
}

fn search_direction(
    tpm: &Tpm,
    state: usize,
    cuts: &[Bipartition],
    dir: RepertoireDirection,
    config: &PhiConfig,
) -> DirectionalPhi {
    let ctx = StateContext::new(tpm, state, dir);
    let eval = |&cut: &Bipartition| {
        let (ei, unreachable) = ctx.cut_ei(cut, dir, config.metric);
        (PartitionEi { cut, ei, nei: ei / cut.min_size() as f64 }, unreachable)
    };
    let results: Vec<(PartitionEi, bool)> =
        if config.parallel { cuts.par_iter().map(eval).collect() } else { cuts.iter().map(eval).collect() };
    let unreachable = results.iter().any(|r| r.1);
    let evals: Vec<PartitionEi> = results.into_iter().map(|r| r.0).collect();
    let best = evals[select_mip(&evals)];
    DirectionalPhi {
        direction: dir,
        phi: best.ei.max(0.0),
        mip: best.cut,
        ei: best.ei,
        nei: best.nei,
        per_partition: if tpm.n() <= PER_PARTITION_LIMIT { evals } else { vec![best] },
        unreachable,
    }
}

/// Exhaustive MIP search at state `s`.
pub fn find_mip(tpm: &Tpm, s: SystemState, config: &PhiConfig) -> Result<PhiResult> {
    check_state(tpm, s)?;
    let n = tpm.n();
    check_capacity(n, config.max_nodes)?;
    if n < 2 {
        return Ok(PhiResult {
            phi: 0.0,
            mip: None,
            per_partition: Vec::new(),
            state: s,
            direction: config.direction,
            cause: None,
            effect: None,
            unreachable: false,
        });
    }
    let cuts = enumerate_bipartitions(n)?;
    let mut cause = None;
    let mut effect = None;
    for &dir in single_directions(config.direction) {
        let r = search_direction(tpm, s.index(), &cuts, dir, config);
        match dir {
            RepertoireDirection::Cause => cause = Some(r),
            RepertoireDirection::Effect => effect = Some(r),
        }
    }
    let chosen = match (&cause, &effect) {
        (Some(c), Some(e)) => {
            if e.phi < c.phi {
                e
            } else {
                c
            }
        }
        (Some(c), None) => c,
        (None, Some(e)) => e,
        (None, None) => unreachable!("at least one direction is searched"),
    };
    Ok(PhiResult {
        phi: chosen.phi,
        mip: Some(chosen.mip),
        per_partition: chosen.per_partition.clone(),
        state: s,
        direction: config.direction,
        unreachable: cause.as_ref().is_some_and(|c| c.unreachable),
        cause,
        effect,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum Weighting {
    Uniform,
    /// Typically the stationary distribution of the dynamics.
    Empirical(StateDistribution),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightingKind {
    Uniform,
    Empirical,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhiBarResult {
    pub phi_bar: f64,
    pub weighting: WeightingKind,
    pub per_state: Vec<(SystemState, f64)>,
    pub weights: Vec<f64>,
    /// States whose cause repertoires hit an unreachable condition.
    pub unreachable: Vec<SystemState>,
}

/// Weighted average of Φ over all states. States run in parallel; each state's cut sweep
/// stays sequential.
pub fn phi_mean(tpm: &Tpm, weighting: &Weighting, config: &PhiConfig) -> Result<PhiBarResult> {
    let n = tpm.n();
    check_capacity(n, config.max_nodes)?;
    let (kind, weights) = match weighting {
        Weighting::Uniform => (WeightingKind::Uniform, vec![1.0 / tpm.num_states() as f64; tpm.num_states()]),
        Weighting::Empirical(d) => {
            if d.n() != n {
                return Err(Error::Input(format!(
                    "weighting covers {} nodes but the TPM has {n}",
                    d.n()
                )));
            }
            (WeightingKind::Empirical, d.probs().to_vec())
        }
    };
    let inner = PhiConfig { parallel: false, ..*config };
    let states: Vec<SystemState> = SystemState::all(n).collect();
    let eval = |s: &SystemState| find_mip(tpm, *s, &inner);
    let results: Vec<PhiResult> = if config.parallel {
        states.par_iter().map(eval).collect::<Result<_>>()?
    } else {
        states.iter().map(eval).collect::<Result<_>>()?
    };
    let phi_bar = results.iter().zip(&weights).map(|(r, w)| w * r.phi).sum();
    Ok(PhiBarResult {
        phi_bar,
        weighting: kind,
        unreachable: results.iter().filter(|r| r.unreachable).map(|r| r.state).collect(),
        per_state: results.iter().map(|r| (r.state, r.phi)).collect(),
        weights,
    })
}
