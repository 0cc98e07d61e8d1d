//! Perturbational complexity: perturb, record, binarize, compress.

mod lz;
mod perturb;

pub use lz::{binary_entropy, lz76_complexity, normalized_lz, PciResult, REFERENCE_BAND, REFERENCE_THRESHOLD};
pub use perturb::{
    baseline_statistics, binarize_responses, pci, pci_trials, perturb_and_record, Activation, BinaryResponse,
    PerturbationSpec, ResponseMatrix, DEFAULT_K,
};
