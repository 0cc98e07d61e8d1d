//! Lempel-Ziv 1976 phrase counting and the normalized complexity index.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower edge of the wakeful reference band; reported alongside results, never enforced.
pub const REFERENCE_THRESHOLD: f64 = 0.31;
/// Reference band for wakeful responses, `[low, high]`.
pub const REFERENCE_BAND: [f64; 2] = [0.31, 0.70];

/// Number of phrases in the exhaustive-history parsing of `bits` (Kaspar-Schuster scan).
/// Any non-zero byte counts as a one.
pub fn lz76_complexity(bits: &[u8]) -> Result<usize> {
    let n = bits.len();
    if n == 0 {
        return Err(Error::Input("LZ76 complexity of an empty sequence".into()));
    }
    if n == 1 {
        return Ok(1);
    }
    let s = |i: usize| bits[i] != 0;
    let (mut i, mut k, mut l, mut c, mut k_max) = (0usize, 1usize, 1usize, 1usize, 1usize);
    loop {
        if s(i + k - 1) == s(l + k - 1) {
            k += 1;
            if l + k > n {
                c += 1;
                break;
            }
        } else {
            k_max = k_max.max(k);
            i += 1;
            if i == l {
                c += 1;
                l += k_max;
                if l + 1 > n {
                    break;
                }
                i = 0;
                k = 1;
                k_max = 1;
            } else {
                k = 1;
            }
        }
    }
    Ok(c)
}

/// Binary source entropy in bits per symbol.
pub fn binary_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        0.0
    } else {
        -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PciResult {
    pub pci: f64,
    pub lz_count: usize,
    pub sequence_length: usize,
    pub source_entropy: f64,
    /// Binarization threshold in baseline SDs, when the sequence came from a response.
    pub k: Option<f64>,
    pub threshold_reference: f64,
}

impl PciResult {
    /// Whether `pci` falls inside [`REFERENCE_BAND`].
    pub fn in_reference_band(&self) -> bool {
        (REFERENCE_BAND[0]..=REFERENCE_BAND[1]).contains(&self.pci)
    }
}

/// `c log2(L) / (L H)`, or 0 when the sequence is constant.
pub fn normalized_lz(bits: &[u8]) -> Result<PciResult> {
    let lz_count = lz76_complexity(bits)?;
    let len = bits.len();
    let ones = bits.iter().filter(|&&b| b != 0).count();
    let h = binary_entropy(ones as f64 / len as f64);
    let pci = if h > 0.0 { lz_count as f64 * (len as f64).log2() / (len as f64 * h) } else { 0.0 };
    Ok(PciResult {
        pci,
        lz_count,
        sequence_length: len,
        source_entropy: h,
        k: None,
        threshold_reference: REFERENCE_THRESHOLD,
    })
}
