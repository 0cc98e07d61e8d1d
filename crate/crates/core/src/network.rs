//! Binary causal networks and their node-conditional transition probability matrices.
//!
//! Nodes update synchronously and independently given the previous full state, so a
//! [`Tpm`] stores `P(node i on at t+1 | state s at t)` as an `n x 2^n` table rather than
//! the full `2^n x 2^n` joint.

use std::collections::HashSet;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::{StateDistribution, SystemState, MAX_STATE_NODES};

/// Dense node index in `0..n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId(pub usize);

/// Update rule of a single node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateKind {
    And,
    Or,
    Xor,
    Majority,
    Copy,
    Threshold,
}

/// A node's mechanism: gate kind, optional threshold and optional logistic sharpness.
///
/// Every mechanism reduces to a scalar drive `d(s)` over the node's inputs. Deterministic
/// nodes (`beta` absent or infinite) fire iff `d > 0`; noisy nodes fire with probability
/// `1 / (1 + exp(-beta * d))`.
///
/// * `and`, `or`, `xor`, `copy`: `d = g(s) - 1/2` for the boolean gate output `g`.
/// * `majority`: `d = sum(w * bit) - theta`, with `theta` defaulting to half the total
///   input weight.
/// * `threshold`: `d = sum(w * bit) - theta`, with `theta` defaulting to 0.
///
/// Nodes without inputs have `g = 0`; `copy` accepts at most one input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mechanism {
    pub kind: GateKind,
    pub theta: Option<f64>,
    pub beta: Option<f64>,
}

impl Mechanism {
    pub fn deterministic(kind: GateKind) -> Self {
        Self { kind, theta: None, beta: None }
    }

    pub fn noisy(kind: GateKind, beta: f64) -> Self {
        Self { kind, theta: None, beta: Some(beta) }
    }

    pub fn threshold(theta: f64, beta: Option<f64>) -> Self {
        Self { kind: GateKind::Threshold, theta: Some(theta), beta }
    }

    pub fn is_deterministic(&self) -> bool {
        self.beta.is_none_or(|b| b.is_infinite())
    }

    fn drive(&self, inputs: &[(usize, f64)], state: usize) -> f64 {
        let on = |src: usize| (state >> src) & 1 == 1;
        let gate = |g: bool| if g { 0.5 } else { -0.5 };
        match self.kind {
            GateKind::And => gate(!inputs.is_empty() && inputs.iter().all(|&(j, _)| on(j))),
            GateKind::Or => gate(inputs.iter().any(|&(j, _)| on(j))),
            GateKind::Xor => gate(inputs.iter().filter(|&&(j, _)| on(j)).count() % 2 == 1),
            GateKind::Copy => gate(inputs.first().is_some_and(|&(j, _)| on(j))),
            GateKind::Majority | GateKind::Threshold => {
                let weighted: f64 = inputs.iter().filter(|&&(j, _)| on(j)).map(|&(_, w)| w).sum();
                weighted - self.effective_theta(inputs)
            }
        }
    }

    fn effective_theta(&self, inputs: &[(usize, f64)]) -> f64 {
        match (self.theta, self.kind) {
            (Some(t), _) => t,
            (None, GateKind::Majority) => inputs.iter().map(|&(_, w)| w).sum::<f64>() / 2.0,
            (None, _) => 0.0,
        }
    }

    /// Probability that the node is on at the next step given the full current state.
    pub fn fire_probability(&self, inputs: &[(usize, f64)], state: usize) -> f64 {
        let d = self.drive(inputs, state);
        match self.beta {
            Some(beta) if beta.is_finite() => 1.0 / (1.0 + (-beta * d).exp()),
            _ => {
                if d > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Directed weighted edge `src -> dst`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub w: f64,
}

/// Directed weighted graph of binary nodes, each with its own mechanism.
#[derive(Debug, Clone, PartialEq)]
pub struct CausalNetwork {
    n: usize,
    mechanisms: Vec<Mechanism>,
    edges: Vec<Edge>,
}

impl CausalNetwork {
    pub fn new(mechanisms: Vec<Mechanism>, edges: Vec<Edge>) -> Result<Self> {
        let n = mechanisms.len();
        if n == 0 {
            return Err(Error::Config("network must have at least one node".into()));
        }
        let mut seen = HashSet::new();
        for (k, e) in edges.iter().enumerate() {
            if e.src >= n || e.dst >= n {
                return Err(Error::Config(format!(
                    "edge {k} ({} -> {}) references a node outside 0..{n}",
                    e.src, e.dst
                )));
            }
            if !e.w.is_finite() {
                return Err(Error::Config(format!(
                    "edge {k} ({} -> {}) has non-finite weight",
                    e.src, e.dst
                )));
            }
            if !seen.insert((e.src, e.dst)) {
                return Err(Error::Config(format!(
                    "edge {k} ({} -> {}) duplicates an earlier edge",
                    e.src, e.dst
                )));
            }
        }
        for (i, m) in mechanisms.iter().enumerate() {
            if let Some(beta) = m.beta {
                if beta.is_nan() || beta <= 0.0 {
                    return Err(Error::Config(format!("node {i} has beta {beta}; beta must be > 0")));
                }
            }
            if m.theta.is_some_and(|t| !t.is_finite()) {
                return Err(Error::Config(format!("node {i} has a non-finite theta")));
            }
            if m.kind == GateKind::Copy {
                let fan_in = edges.iter().filter(|e| e.dst == i && e.w != 0.0).count();
                if fan_in > 1 {
                    return Err(Error::Config(format!(
                        "node {i} is a copy gate with {fan_in} inputs; copy takes at most one"
                    )));
                }
            }
        }
        Ok(Self { n, mechanisms, edges })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mechanisms(&self) -> &[Mechanism] {
        &self.mechanisms
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge_weights(&self) -> Vec<f64> {
        self.edges.iter().map(|e| e.w).collect()
    }

    /// Same structure with new weights, in edge order.
    pub fn with_edge_weights(&self, weights: &[f64]) -> Result<Self> {
        if weights.len() != self.edges.len() {
            return Err(Error::Input(format!(
                "{} weights supplied for {} edges",
                weights.len(),
                self.edges.len()
            )));
        }
        let edges = self
            .edges
            .iter()
            .zip(weights)
            .map(|(e, &w)| Edge { w, ..*e })
            .collect();
        Self::new(self.mechanisms.clone(), edges)
    }

    /// Relabel nodes so that old node `i` becomes node `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.n)?;
        let mut mechanisms = self.mechanisms.clone();
        for (old, &new) in perm.iter().enumerate() {
            mechanisms[new] = self.mechanisms[old];
        }
        let edges = self
            .edges
            .iter()
            .map(|e| Edge { src: perm[e.src], dst: perm[e.dst], w: e.w })
            .collect();
        Self::new(mechanisms, edges)
    }

    /// Inputs of node `i` as `(src, weight)`, zero-weight edges dropped, sorted by source.
    pub fn inputs(&self, i: usize) -> Vec<(usize, f64)> {
        let mut v: Vec<_> = self
            .edges
            .iter()
            .filter(|e| e.dst == i && e.w != 0.0)
            .map(|e| (e.src, e.w))
            .collect();
        v.sort_by_key(|&(src, _)| src);
        v
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: NetworkFile =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("network file: {e}")))?;
        file.into_network()
    }

    pub fn to_json(&self) -> String {
        let file = NetworkFile::from(self);
        serde_json::to_string_pretty(&file).expect("network serializes")
    }
}

pub(crate) fn check_permutation(perm: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    if perm.len() != n {
        return Err(Error::Input(format!("permutation has length {}, expected {n}", perm.len())));
    }
    for &p in perm {
        if p >= n || seen[p] {
            return Err(Error::Input("not a permutation of 0..n".into()));
        }
        seen[p] = true;
    }
    Ok(())
}

/// On-disk JSON network description.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    pub n: usize,
    pub nodes: Vec<NodeSpec>,
    #[serde(default)]
    pub edges: Vec<Edge>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub id: usize,
    pub kind: GateKind,
    #[serde(default)]
    pub theta: Option<f64>,
    #[serde(default)]
    pub beta: Option<f64>,
}

impl NetworkFile {
    pub fn into_network(self) -> Result<CausalNetwork> {
        if self.nodes.len() != self.n {
            return Err(Error::Config(format!(
                "n = {} but {} nodes are listed",
                self.n,
                self.nodes.len()
            )));
        }
        let mut mechanisms: Vec<Option<Mechanism>> = vec![None; self.n];
        for (k, node) in self.nodes.iter().enumerate() {
            if node.id >= self.n {
                return Err(Error::Config(format!("nodes[{k}] has id {} outside 0..{}", node.id, self.n)));
            }
            if mechanisms[node.id].is_some() {
                return Err(Error::Config(format!("nodes[{k}] repeats id {}", node.id)));
            }
            mechanisms[node.id] = Some(Mechanism { kind: node.kind, theta: node.theta, beta: node.beta });
        }
        let mechanisms = mechanisms.into_iter().map(|m| m.expect("ids are dense")).collect();
        CausalNetwork::new(mechanisms, self.edges)
    }
}

impl From<&CausalNetwork> for NetworkFile {
    fn from(net: &CausalNetwork) -> Self {
        Self {
            n: net.n,
            nodes: net
                .mechanisms
                .iter()
                .enumerate()
                .map(|(id, m)| NodeSpec { id, kind: m.kind, theta: m.theta, beta: m.beta })
                .collect(),
            edges: net.edges.clone(),
        }
    }
}

/// Node-conditional transition probabilities.
///
/// `cond(i, s) = P(node i on at t+1 | state s at t)`. Storage is state-major so that all
/// node probabilities for one state are contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct Tpm {
    n: usize,
    cond: Vec<f64>,
}

impl Tpm {
    /// `rows[i][s]` is the firing probability of node `i` in state `s`.
    pub fn from_node_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 || n > MAX_STATE_NODES {
            return Err(Error::Input(format!("TPM must have 1..={MAX_STATE_NODES} node rows, got {n}")));
        }
        let states = 1usize << n;
        let mut cond = vec![0.0; n * states];
        for (i, row) in rows.iter().enumerate() {
            if row.len() != states {
                return Err(Error::Input(format!(
                    "TPM row {i} has {} columns, expected {states}",
                    row.len()
                )));
            }
            for (s, &p) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::Input(format!("TPM entry ({i}, s{s}) = {p} outside [0, 1]")));
                }
                cond[s * n + i] = p;
            }
        }
        Ok(Self { n, cond })
    }

    pub(crate) fn from_state_major(n: usize, cond: Vec<f64>) -> Self {
        debug_assert_eq!(cond.len(), n << n);
        Self { n, cond }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_states(&self) -> usize {
        1usize << self.n
    }

    #[inline]
    pub fn cond(&self, node: usize, state: usize) -> f64 {
        self.cond[state * self.n + node]
    }

    /// All node probabilities for `state`.
    #[inline]
    pub fn state_row(&self, state: usize) -> &[f64] {
        &self.cond[state * self.n..(state + 1) * self.n]
    }

    pub fn node_row(&self, node: usize) -> Vec<f64> {
        (0..self.num_states()).map(|s| self.cond(node, s)).collect()
    }

    pub fn is_deterministic(&self) -> bool {
        self.cond.iter().all(|&p| p == 0.0 || p == 1.0)
    }

    /// Relabel nodes so that old node `i` becomes node `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.n)?;
        let n = self.n;
        let mut cond = vec![0.0; self.cond.len()];
        for s in 0..self.num_states() {
            let t = permute_state(s, perm);
            for i in 0..n {
                cond[t * n + perm[i]] = self.cond(i, s);
            }
        }
        Ok(Self { n, cond })
    }

    /// CSV with header `node,s0,s1,...` and one row per node.
    pub fn to_csv(&self, fmt_f64: impl Fn(f64) -> String) -> String {
        let mut out = String::from("node");
        for s in 0..self.num_states() {
            write!(out, ",s{s}").unwrap();
        }
        out.push('\n');
        for i in 0..self.n {
            write!(out, "{i}").unwrap();
            for s in 0..self.num_states() {
                write!(out, ",{}", fmt_f64(self.cond(i, s))).unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Input("empty TPM file".into()))?;
        let columns = header.split(',').count();
        if !header.starts_with("node") || columns < 2 {
            return Err(Error::Input("TPM header must be node,s0,s1,...".into()));
        }
        let mut rows = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != columns {
                return Err(Error::Input(format!(
                    "TPM line {} has {} fields, expected {columns}",
                    lineno + 2,
                    fields.len()
                )));
            }
            let row = fields[1..]
                .iter()
                .map(|f| {
                    f.parse::<f64>()
                        .map_err(|_| Error::Input(format!("TPM line {}: cannot parse {f:?}", lineno + 2)))
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Self::from_node_rows(&rows)
    }
}

pub(crate) fn permute_state(s: usize, perm: &[usize]) -> usize {
    perm.iter()
        .enumerate()
        .fold(0, |acc, (old, &new)| acc | (((s >> old) & 1) << new))
}

/// Tabulate every node's firing probability over all `2^n` states.
pub fn build_tpm(net: &CausalNetwork) -> Result<Tpm> {
    let n = net.n();
    if n > MAX_STATE_NODES {
        return Err(Error::capacity(n, MAX_STATE_NODES));
    }
    let inputs: Vec<Vec<(usize, f64)>> = (0..n).map(|i| net.inputs(i)).collect();
    let mut cond = vec![0.0; n << n];
    cond.par_chunks_mut(n).enumerate().for_each(|(s, row)| {
        for (i, p) in row.iter_mut().enumerate() {
            *p = net.mechanisms[i].fire_probability(&inputs[i], s);
        }
    });
    Ok(Tpm::from_state_major(n, cond))
}

/// `P(next = s' | current = s)` for all `s'`, as a product of node marginals.
pub fn joint_row(tpm: &Tpm, s: SystemState) -> Result<StateDistribution> {
    check_state(tpm, s)?;
    Ok(StateDistribution::from_raw(tpm.n(), product_distribution(tpm.state_row(s.index()))))
}

/// Joint distribution of independent bits with the given on-probabilities.
pub(crate) fn product_distribution(p_on: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(1 << p_on.len());
    out.push(1.0);
    for &p in p_on {
        let len = out.len();
        out.resize(2 * len, 0.0);
        for k in 0..len {
            let base = out[k];
            out[k] = base * (1.0 - p);
            out[k + len] = base * p;
        }
    }
    out
}

pub(crate) fn check_state(tpm: &Tpm, s: SystemState) -> Result<()> {
    if s.len() != tpm.n() {
        return Err(Error::Input(format!(
            "state has {} bits but the TPM has {} nodes",
            s.len(),
            tpm.n()
        )));
    }
    Ok(())
}

/// In- and out-degree of node `i`, counting only edges with non-zero weight.
pub fn node_degree(net: &CausalNetwork, i: NodeId) -> Result<(usize, usize)> {
    if i.0 >= net.n() {
        return Err(Error::Input(format!("node {} out of range 0..{}", i.0, net.n())));
    }
    let live = net.edges.iter().filter(|e| e.w != 0.0);
    let (mut din, mut dout) = (0, 0);
    for e in live {
        if e.dst == i.0 {
            din += 1;
        }
        if e.src == i.0 {
            dout += 1;
        }
    }
    Ok((din, dout))
}

/// One synchronous update: node `i` turns on iff a fresh uniform draw falls below its
/// firing probability. Draws are consumed in node order, one per node per step.
pub fn sample_next(tpm: &Tpm, state: usize, rng: &mut impl Rng) -> usize {
    tpm.state_row(state)
        .iter()
        .enumerate()
        .fold(0, |acc, (i, &p)| if rng.random::<f64>() < p { acc | (1 << i) } else { acc })
}

/// Trajectory of `steps + 1` states starting from `start`.
pub fn sample_trajectory(tpm: &Tpm, start: SystemState, steps: usize, seed: u64) -> Result<Vec<SystemState>> {
    check_state(tpm, start)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = start.index();
    let mut out = Vec::with_capacity(steps + 1);
    out.push(start);
    for _ in 0..steps {
        s = sample_next(tpm, s, &mut rng);
        out.push(SystemState::new(tpm.n(), s)?);
    }
    Ok(out)
}

/// Empirical state frequencies of a seeded chain whose start state is itself drawn
/// uniformly from the same generator.
pub fn stationary_distribution(tpm: &Tpm, burn_in: usize, samples: usize, seed: u64) -> Result<StateDistribution> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = rng.random_range(0..tpm.num_states());
    run_chain(tpm, start, burn_in, samples, &mut rng)
}

/// Empirical state frequencies of a seeded chain from an explicit start state.
///
/// The states after transitions `burn_in + 1 ..= burn_in + samples` are counted.
pub fn stationary_distribution_from(
    tpm: &Tpm,
    start: SystemState,
    burn_in: usize,
    samples: usize,
    seed: u64,
) -> Result<StateDistribution> {
    check_state(tpm, start)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    run_chain(tpm, start.index(), burn_in, samples, &mut rng)
}

fn run_chain(tpm: &Tpm, start: usize, burn_in: usize, samples: usize, rng: &mut ChaCha8Rng) -> Result<StateDistribution> {
    if samples == 0 {
        return Err(Error::Input("stationary distribution needs at least one sample".into()));
    }
    let mut counts = vec![0u64; tpm.num_states()];
    let mut s = start;
    for _ in 0..burn_in {
        s = sample_next(tpm, s, rng);
    }
    for _ in 0..samples {
        s = sample_next(tpm, s, rng);
        counts[s] += 1;
    }
    let total = samples as f64;
    Ok(StateDistribution::from_raw(tpm.n(), counts.into_iter().map(|c| c as f64 / total).collect()))
}
