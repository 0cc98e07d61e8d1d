//! Shared helpers: a brute-force Φ oracle over full joint transition matrices and random
//! network generators.
#![allow(dead_code)]

use ncac_core::phi::{Direction, KL_EPSILON};
use ncac_core::{CausalNetwork, Edge, GateKind, Mechanism, Tpm};
use rand::Rng;

/// Full `2^n x 2^n` matrix `J[x][y] = P(next = y | current = x)`.
pub fn joint_matrix(tpm: &Tpm) -> Vec<Vec<f64>> {
    let n = tpm.n();
    let size = 1usize << n;
    (0..size)
        .map(|x| {
            (0..size)
                .map(|y| {
                    (0..n)
                        .map(|i| {
                            let p = tpm.cond(i, x);
                            if (y >> i) & 1 == 1 { p } else { 1.0 - p }
                        })
                        .product()
                })
                .collect()
        })
        .collect()
}

fn bits_of(mask: u32, n: usize) -> Vec<usize> {
    (0..n).filter(|&i| (mask >> i) & 1 == 1).collect()
}

/// Index of `x` restricted to the nodes of `mask`, lowest node first.
fn restrict(x: usize, nodes: &[usize]) -> usize {
    nodes.iter().enumerate().map(|(j, &i)| ((x >> i) & 1) << j).sum()
}

fn kl(p: &[f64], q: &[f64]) -> f64 {
    let mut d = 0.0;
    for (a, b) in p.iter().zip(q) {
        if *a > 0.0 {
            d += a * (a / (b + KL_EPSILON)).log2();
        }
    }
    d
}

/// Effect distribution of `part` (over its own nodes) at state `s`, with every node outside
/// `part` replaced by a fair coin, by summing the full joint over the other nodes.
pub fn naive_effect_part(j: &[Vec<f64>], n: usize, s: usize, part: u32) -> Vec<f64> {
    let nodes = bits_of(part, n);
    let other = bits_of(!part & ((1 << n) - 1), n);
    let mut out = vec![0.0; 1 << nodes.len()];
    let configs = 1usize << other.len();
    for z in 0..configs {
        let mut x = s;
        for (k, &i) in other.iter().enumerate() {
            x = (x & !(1 << i)) | (((z >> k) & 1) << i);
        }
        for (y, p) in j[x].iter().enumerate() {
            out[restrict(y, &nodes)] += p / configs as f64;
        }
    }
    out
}

/// Posterior over the past of `part` given the current state of `part` at `s`, uniform
/// prior over every past state.
pub fn naive_cause_part(j: &[Vec<f64>], n: usize, s: usize, part: u32) -> Vec<f64> {
    let nodes = bits_of(part, n);
    let size = 1usize << n;
    let mut out = vec![0.0; 1 << nodes.len()];
    for x in 0..size {
        let lik: f64 = (0..size).filter(|&y| restrict(y, &nodes) == restrict(s, &nodes)).map(|y| j[x][y]).sum();
        out[restrict(x, &nodes)] += lik;
    }
    normalize(out)
}

fn normalize(v: Vec<f64>) -> Vec<f64> {
    let total: f64 = v.iter().sum();
    if total > 0.0 {
        v.into_iter().map(|x| x / total).collect()
    } else {
        let u = 1.0 / v.len() as f64;
        vec![u; v.len()]
    }
}

fn product(n: usize, a: u32, pa: &[f64], pb: &[f64]) -> Vec<f64> {
    let na = bits_of(a, n);
    let nb = bits_of(!a & ((1 << n) - 1), n);
    (0..1usize << n).map(|x| pa[restrict(x, &na)] * pb[restrict(x, &nb)]).collect()
}

/// `ei` across the cut `a | rest` in one direction (`cause = true` for the cause side).
pub fn naive_ei(j: &[Vec<f64>], n: usize, s: usize, a: u32, cause: bool) -> f64 {
    let full = (1u32 << n) - 1;
    let b = full & !a;
    if cause {
        let whole = naive_cause_part(j, n, s, full);
        let prod = product(n, a, &naive_cause_part(j, n, s, a), &naive_cause_part(j, n, s, b));
        kl(&whole, &prod)
    } else {
        let whole = j[s].clone();
        let prod = product(n, a, &naive_effect_part(j, n, s, a), &naive_effect_part(j, n, s, b));
        kl(&whole, &prod)
    }
}

/// Φ at `s` in one direction: among cuts tied on least ei / min part size, the least ei,
/// then the lowest mask. Clamped at 0.
pub fn naive_phi_one(j: &[Vec<f64>], n: usize, s: usize, cause: bool) -> (f64, u32) {
    let mut all = Vec::new();
    for a in 1u32..(1 << n) - 1 {
        if a & 1 == 0 {
            continue;
        }
        let ei = naive_ei(j, n, s, a, cause);
        let size_a = a.count_ones() as f64;
        all.push((ei, ei / size_a.min(n as f64 - size_a), a));
    }
    let min_nei = all.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
    all.retain(|c| c.1 <= min_nei + 1e-10);
    let min_ei = all.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
    let &(ei, _, a) = all.iter().find(|c| c.0 <= min_ei + 1e-10).expect("n >= 2");
    (ei.max(0.0), a)
}

pub fn naive_phi(tpm: &Tpm, s: usize, direction: Direction) -> f64 {
    let n = tpm.n();
    if n < 2 {
        return 0.0;
    }
    let j = joint_matrix(tpm);
    match direction {
        Direction::Cause => naive_phi_one(&j, n, s, true).0,
        Direction::Effect => naive_phi_one(&j, n, s, false).0,
        Direction::Min => naive_phi_one(&j, n, s, true).0.min(naive_phi_one(&j, n, s, false).0),
    }
}

pub const LOGIC_GATES: [GateKind; 5] = [GateKind::And, GateKind::Or, GateKind::Xor, GateKind::Copy, GateKind::Majority];

/// Random gate network: each ordered pair (self loops included) is an edge with
/// probability 1/2; copy nodes keep only their first input. `beta` makes every node noisy.
pub fn random_logic_network(rng: &mut impl Rng, n: usize, beta: Option<f64>) -> CausalNetwork {
    let kinds: Vec<GateKind> = (0..n).map(|_| LOGIC_GATES[rng.random_range(0..LOGIC_GATES.len())]).collect();
    let mut edges = Vec::new();
    for dst in 0..n {
        let mut srcs: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.5)).collect();
        if kinds[dst] == GateKind::Copy {
            srcs.truncate(1);
        }
        edges.extend(srcs.into_iter().map(|src| Edge { src, dst, w: 1.0 }));
    }
    let mechs = kinds
        .into_iter()
        .map(|k| match beta {
            Some(b) => Mechanism::noisy(k, b),
            None => Mechanism::deterministic(k),
        })
        .collect();
    CausalNetwork::new(mechs, edges).expect("generated network is valid")
}

/// Random weighted threshold network with every off-diagonal edge present.
pub fn random_threshold_network(rng: &mut impl Rng, n: usize, beta: f64) -> CausalNetwork {
    let mut edges = Vec::new();
    for dst in 0..n {
        for src in 0..n {
            if src != dst {
                edges.push(Edge { src, dst, w: rng.random_range(-2.0..2.0) });
            }
        }
    }
    CausalNetwork::new(vec![Mechanism::threshold(0.5, Some(beta)); n], edges).expect("valid")
}

/// No edges between distinct nodes; every node sees only itself, so every cut factorizes.
pub fn disconnected(n: usize, kinds: &[GateKind], beta: Option<f64>) -> CausalNetwork {
    let mechs = (0..n)
        .map(|i| {
            let k = kinds[i % kinds.len()];
            beta.map_or(Mechanism::deterministic(k), |b| Mechanism::noisy(k, b))
        })
        .collect();
    let edges = (0..n).map(|i| Edge { src: i, dst: i, w: 1.0 }).collect();
    CausalNetwork::new(mechs, edges).expect("valid")
}
