//! Deterministic toy-scale training simulator.
//!
//! A tabular autoregressive policy over the marker vocabulary is trained
//! with the group-relative protocol: snapshot the behavior policy, sample
//! G responses per query, score them with the structured reward, normalize
//! advantages within each group, then apply one or more gradient updates
//! per batch. The first update is on-policy (all ratios exactly 1); later
//! updates in the same batch reuse the sampled trajectories and become
//! off-policy, which is where the gate choice starts to matter.
//!
//! All sampling randomness is counter-based, so runs are bit-identical for
//! equal configurations regardless of thread count.

mod config;
mod policy;
mod train;

pub use config::{parse_config, ConfigError, TaskKind, TrainConfig};
pub use policy::{policy_entropy, Context, TabularPolicy};
pub use train::{
    batch_gradient, run_training, run_training_streaming, sample_group, train_step, SampledGroup,
    StepMetrics, Task, UpdateStats,
};

use thiserror::Error;

use crate::advantage::AdvantageError;
use crate::gates::GateError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("policy diverged: non-finite logit after update at step {step}")]
    Diverged { step: u64 },
    #[error("no visited contexts to evaluate entropy over")]
    EmptyContexts,
    #[error("batch contains no groups")]
    EmptyBatch,
    #[error("sample length {requested} exceeds policy maximum {max}")]
    SampleTooLong { requested: usize, max: usize },
    #[error("query index {query} out of range for {num_queries} queries")]
    QueryOutOfRange { query: usize, num_queries: usize },
    #[error(transparent)]
    Advantage(#[from] AdvantageError),
    #[error(transparent)]
    Gate(#[from] GateError),
    #[error(transparent)]
    Config(#[from] ConfigError),
}
