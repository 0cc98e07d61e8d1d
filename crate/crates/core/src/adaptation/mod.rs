//! Tuning network parameters until their Φ matches exogenous targets.

mod loss;
mod model;
mod optimizer;

pub use loss::{ncac_loss, LossForm, LossSpec, LossValue, PhiTarget, TargetAt, TargetEntry};
pub use model::{unsupervised_pretrain, Measurement, PhiModel, SpikingSubject};
pub use optimizer::{
    adapt, minimize, spsa_step, AdaptationTrace, EvalKind, Evaluation, OptimizerConfig, OptimizerKind, SpsaStep,
    StopReason, TraceEntry,
};
