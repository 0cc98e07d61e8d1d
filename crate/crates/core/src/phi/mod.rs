//! Integrated information over bipartitions of a TPM.

mod bipartition;
mod metric;
mod mip;
mod repertoire;

pub use bipartition::{enumerate_bipartitions, Bipartition};
pub use metric::{emd_hamming, kl_bits, Metric, KL_EPSILON};
pub use mip::{
    effective_information, find_mip, phi_mean, DirectionalPhi, Direction, PartitionEi, PhiBarResult, PhiConfig,
    PhiResult, Weighting, WeightingKind, DEFAULT_MAX_NODES, MIP_TIE_TOLERANCE, PER_PARTITION_LIMIT,
};
pub use repertoire::{cause_repertoire, effect_repertoire, Repertoire, RepertoireDirection};
