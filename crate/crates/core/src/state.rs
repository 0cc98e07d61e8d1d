//! Binary system states, encoded little-endian (node `i` is bit `i`).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest network for which full state enumeration is supported.
pub const MAX_STATE_NODES: usize = 20;

/// One bit per node; node `i` is bit `i` of `index`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SystemState {
    n: usize,
    index: usize,
}

impl SystemState {
    pub fn new(n: usize, index: usize) -> Result<Self> {
        if n > MAX_STATE_NODES {
            return Err(Error::Input(format!(
                "state width {n} exceeds the supported maximum of {MAX_STATE_NODES}"
            )));
        }
        if index >= 1usize << n {
            return Err(Error::Input(format!(
                "state index {index} out of range for {n} nodes"
            )));
        }
        Ok(Self { n, index })
    }

    /// Build from a bit vector; any non-zero entry counts as on.
    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        let index = bits
            .iter()
            .enumerate()
            .fold(0usize, |acc, (i, &b)| if b != 0 { acc | (1 << i) } else { acc });
        Self::new(bits.len(), index)
    }

    pub fn zeros(n: usize) -> Self {
        Self { n, index: 0 }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn bit(&self, i: usize) -> bool {
        (self.index >> i) & 1 == 1
    }

    pub fn bits(&self) -> Vec<u8> {
        (0..self.n).map(|i| self.bit(i) as u8).collect()
    }

    /// Every state of an `n`-node system in ascending index order.
    pub fn all(n: usize) -> impl Iterator<Item = SystemState> {
        (0..1usize << n).map(move |index| SystemState { n, index })
    }
}

impl fmt::Display for SystemState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for i in 0..self.n {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", self.bit(i) as u8)?;
        }
        write!(f, ")")
    }
}

/// A probability distribution over the `2^n` states of a system.
#[derive(Debug, Clone, PartialEq)]
pub struct StateDistribution {
    n: usize,
    probs: Vec<f64>,
}

impl StateDistribution {
    /// Validates non-negativity and unit mass within `1e-9`.
    pub fn new(n: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != 1usize << n {
            return Err(Error::Input(format!(
                "distribution has {} entries, expected 2^{n}",
                probs.len()
            )));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::Input("distribution has negative or non-finite entries".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Input(format!("distribution sums to {total}, not 1")));
        }
        Ok(Self { n, probs })
    }

    pub(crate) fn from_raw(n: usize, probs: Vec<f64>) -> Self {
        debug_assert_eq!(probs.len(), 1usize << n);
        Self { n, probs }
    }

    pub fn uniform(n: usize) -> Self {
        let len = 1usize << n;
        Self { n, probs: vec![1.0 / len as f64; len] }
    }

    pub fn point_mass(state: SystemState) -> Self {
        let mut probs = vec![0.0; 1usize << state.len()];
        probs[state.index()] = 1.0;
        Self { n: state.len(), probs }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, state: SystemState) -> f64 {
        self.probs[state.index()]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn little_endian_encoding() {
        let s = SystemState::from_bits(&[1, 0, 1]).unwrap();
        assert_eq!(s.index(), 5);
        assert!(s.bit(0) && !s.bit(1) && s.bit(2));
        assert_eq!(s.bits(), vec![1, 0, 1]);
        assert_eq!(s.to_string(), "(1,0,1)");
    }

    #[test]
    fn rejects_out_of_range_index() {
        assert!(SystemState::new(2, 4).is_err());
        assert!(SystemState::new(21, 0).is_err());
    }

    #[test]
    fn distribution_validation() {
        assert!(StateDistribution::new(1, vec![0.5, 0.5]).is_ok());
        assert!(StateDistribution::new(1, vec![0.5, 0.6]).is_err());
        assert!(StateDistribution::new(1, vec![1.5, -0.5]).is_err());
        assert!(StateDistribution::new(2, vec![1.0]).is_err());
    }
}
