//! Distances between repertoires over the same node set.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

/// Additive smoothing applied to the second KL argument.
pub const KL_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    /// Kullback-Leibler divergence in bits.
    #[default]
    Kl,
    /// Earth mover's distance with Hamming ground distance on binary states.
    Emd,
}

impl Metric {
    pub fn distance(self, p: &[f64], q: &[f64]) -> f64 {
        match self {
            Metric::Kl => kl_bits(p, q),
            Metric::Emd => emd_hamming(p, q),
        }
    }
}

/// `sum p log2(p / (q + eps))` over the support of `p`.
///
/// Because `eps` is added without renormalizing, two distributions that agree up to
/// rounding score slightly below zero (at most `|support| * eps / ln 2` in magnitude).
pub fn kl_bits(p: &[f64], q: &[f64]) -> f64 {
    debug_assert_eq!(p.len(), q.len());
    p.iter()
        .zip(q)
        .filter(|(&pi, _)| pi > 0.0)
        .map(|(&pi, &qi)| pi * (pi / (qi + KL_EPSILON)).log2())
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Frontier {
    dist: f64,
    node: usize,
}

impl Eq for Frontier {}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        other.dist.total_cmp(&self.dist).then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

const FLOW_EPS: f64 = 1e-15;

/// Earth mover's distance between distributions on `{0,1}^k` (indexed by state), with
/// Hamming ground distance.
///
/// Hamming distance is the hop metric of the hypercube graph, so this is an uncapacitated
/// min-cost flow with unit arc costs, solved by successive shortest paths with Johnson
/// potentials.
pub fn emd_hamming(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len());
    let len = p.len();
    assert!(len.is_power_of_two(), "distribution length must be 2^k");
    let k = len.trailing_zeros() as usize;
    let mut excess: Vec<f64> = p.iter().zip(q).map(|(a, b)| a - b).collect();
    // flow[v * k + d] = flow on the arc v -> v ^ (1 << d)
    let mut flow = vec![0.0; len * k];
    let mut potential = vec![0.0; len];
    let mut cost = 0.0;
    let mut dist = vec![f64::INFINITY; len];
    let mut prev: Vec<Option<(usize, usize)>> = vec![None; len];
    loop {
        let sources: Vec<usize> = (0..len).filter(|&v| excess[v] > FLOW_EPS).collect();
        if sources.is_empty() {
            break;
        }
        dist.iter_mut().for_each(|d| *d = f64::INFINITY);
        prev.iter_mut().for_each(|p| *p = None);
        let mut heap = BinaryHeap::new();
        for &s in &sources {
            dist[s] = 0.0;
            heap.push(Frontier { dist: 0.0, node: s });
        }
        let mut sink = None;
        while let Some(Frontier { dist: d, node: v }) = heap.pop() {
            if d > dist[v] {
                continue;
            }
            if excess[v] < -FLOW_EPS {
                sink = Some(v);
                break;
            }
            for bit in 0..k {
                let u = v ^ (1 << bit);
                // forward arc v -> u always available at cost 1; cancelling u -> v flow
                // costs -1 and is only possible when it carries flow
                let reverse = flow[u * k + bit];
                let arc_cost: f64 = if reverse > FLOW_EPS { -1.0 } else { 1.0 };
                let reduced = arc_cost + potential[v] - potential[u];
                let nd = d + reduced.max(0.0);
                if nd < dist[u] - 1e-12 {
                    dist[u] = nd;
                    prev[u] = Some((v, bit));
                    heap.push(Frontier { dist: nd, node: u });
                }
            }
        }
        let Some(sink) = sink else { break };
        let reach = dist[sink];
        for v in 0..len {
            potential[v] += dist[v].min(reach);
        }
        // bottleneck: source excess, sink deficit, and flow on cancelled arcs
        let mut amount = -excess[sink];
        let mut v = sink;
        while let Some((u, bit)) = prev[v] {
            let reverse = flow[v * k + bit];
            if reverse > FLOW_EPS {
                amount = amount.min(reverse);
            }
            v = u;
        }
        amount = amount.min(excess[v]);
        let mut v = sink;
        while let Some((u, bit)) = prev[v] {
            let reverse = flow[v * k + bit];
            if reverse > FLOW_EPS {
                flow[v * k + bit] -= amount;
                cost -= amount;
            } else {
                flow[u * k + bit] += amount;
                cost += amount;
            }
            v = u;
        }
        excess[v] -= amount;
        excess[sink] += amount;
    }
    cost.max(0.0)
}
