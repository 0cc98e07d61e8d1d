use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A cut of the node set into two non-empty halves, stored as bitmasks.
///
/// Canonical form keeps node 0 in `part_a`, so each unordered cut appears exactly once.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Bipartition {
    part_a: u32,
    part_b: u32,
}

impl Bipartition {
    /// Canonicalizes: if node 0 is in `part_a`'s complement the halves are swapped.
    pub fn new(n: usize, part_a: u32) -> Result<Self> {
        if !(2..=32).contains(&n) {
            return Err(Error::Input(format!("bipartitions need 2..=32 nodes, got {n}")));
        }
        let full = full_mask(n);
        if part_a & !full != 0 || part_a == 0 || part_a == full {
            return Err(Error::Input(format!("mask {part_a:#b} is not a proper subset of {n} nodes")));
        }
        let (a, b) = if part_a & 1 == 1 { (part_a, full & !part_a) } else { (full & !part_a, part_a) };
        Ok(Self { part_a: a, part_b: b })
    }

    pub fn part_a(&self) -> u32 {
        self.part_a
    }

    pub fn part_b(&self) -> u32 {
        self.part_b
    }

    pub fn size_a(&self) -> usize {
        self.part_a.count_ones() as usize
    }

    pub fn size_b(&self) -> usize {
        self.part_b.count_ones() as usize
    }

    /// Size of the smaller half.
    pub fn min_size(&self) -> usize {
        self.size_a().min(self.size_b())
    }

    pub fn nodes_a(&self) -> Vec<usize> {
        mask_nodes(self.part_a)
    }

    pub fn nodes_b(&self) -> Vec<usize> {
        mask_nodes(self.part_b)
    }

    /// Bipartition after relabelling old node `i` as `perm[i]`, in canonical form.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let mask = self.nodes_a().iter().fold(0u32, |m, &i| m | (1 << perm[i]));
        Self::new(perm.len(), mask)
    }
}

impl std::fmt::Display for Bipartition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let side = |nodes: Vec<usize>| nodes.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(",");
        write!(f, "{{{}}}|{{{}}}", side(self.nodes_a()), side(self.nodes_b()))
    }
}

pub(crate) fn full_mask(n: usize) -> u32 {
    if n >= 32 {
        u32::MAX
    } else {
        (1u32 << n) - 1
    }
}

pub(crate) fn mask_nodes(mask: u32) -> Vec<usize> {
    (0..32).filter(|&i| (mask >> i) & 1 == 1).collect()
}

/// Every canonical bipartition of `n` nodes, ascending by `part_a` mask:
/// `2^(n-1) - 1` cuts.
pub fn enumerate_bipartitions(n: usize) -> Result<Vec<Bipartition>> {
    if n < 2 {
        return Err(Error::Input(format!("cannot bipartition {n} node(s)")));
    }
    if n > 31 {
        return Err(Error::Input(format!("cannot enumerate bipartitions of {n} nodes")));
    }
    let full = full_mask(n);
    Ok((1..full)
        .step_by(2)
        .map(|a| Bipartition { part_a: a, part_b: full & !a })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_counts() {
        let two = enumerate_bipartitions(2).unwrap();
        assert_eq!(two.len(), 1);
        assert_eq!(two[0].to_string(), "{0}|{1}");

        let three: Vec<String> = enumerate_bipartitions(3).unwrap().iter().map(|b| b.to_string()).collect();
        assert_eq!(three, vec!["{0}|{1,2}", "{0,1}|{2}", "{0,2}|{1}"]);

        assert_eq!(enumerate_bipartitions(10).unwrap().len(), 511);
        assert!(enumerate_bipartitions(1).is_err());
    }

    #[test]
    fn canonical_form() {
        let b = Bipartition::new(4, 0b0110).unwrap();
        assert_eq!((b.part_a(), b.part_b()), (0b1001, 0b0110));
        assert!(Bipartition::new(3, 0).is_err());
        assert!(Bipartition::new(3, 0b111).is_err());
        assert!(Bipartition::new(3, 0b1000).is_err());
    }

    #[test]
    fn each_cut_once() {
        for n in 2..=8 {
            let cuts = enumerate_bipartitions(n).unwrap();
            assert_eq!(cuts.len(), (1 << (n - 1)) - 1);
            let mut seen = std::collections::HashSet::new();
            for c in &cuts {
                assert_eq!(c.part_a() & c.part_b(), 0);
                assert_eq!(c.part_a() | c.part_b(), full_mask(n));
                assert!(c.part_a() & 1 == 1);
                assert!(seen.insert(c.part_a().min(c.part_b())));
            }
            assert!(cuts.windows(2).all(|w| w[0].part_a() < w[1].part_a()));
        }
    }
}
