//! Soft gating for group-relative policy optimization.
//!
//! Hard ratio clipping zeroes the gradient of every token whose importance
//! ratio leaves the trust region. This crate implements the smooth
//! alternative: gate functions whose derivative peaks at 1 on-policy and
//! decays as the ratio drifts (exponential, Gaussian, or polynomial tails),
//! so extreme tokens are attenuated instead of silenced.
//!
//! Modules:
//!
//! * [`gates`]: the gate families and their analytic derivatives.
//! * [`advantage`]: group-relative advantage normalization.
//! * [`objective`]: clipped and soft per-token/batch surrogates.
//! * [`admissibility`]: numerical checks that a candidate gate qualifies.
//! * [`reward`]: tiered format/answer reward over marked responses.
//! * [`toysim`]: deterministic tabular training simulator.
//!
//! Everything outside the simulator is pure and thread-safe; the simulator
//! is deterministic per seed, with counter-based draws so the `parallel`
//! feature (on by default) never changes results.
//!
//! ```
//! use softgate::{gate_derivative, gate_weight_for_token, GateKind, GateSpec, Temperature};
//!
//! // An arctan gate that suppresses overshooting updates harder than
//! // undershooting ones.
//! let temperature = Temperature::new(2.0, 8.0)?;
//! let gate = GateSpec::smooth(GateKind::Arctan, temperature)?;
//!
//! // On-policy tokens always carry full weight.
//! assert_eq!(gate_weight_for_token(&gate, 1.0, 0.7)?, 1.0);
//! // An off-policy token with positive advantage is attenuated by f'(r).
//! let w = gate_weight_for_token(&gate, 1.5, 0.7)?;
//! assert_eq!(w, gate_derivative(GateKind::Arctan, 2.0, 1.5)?);
//! assert!(w < 1.0);
//! # Ok::<(), softgate::GateError>(())
//! ```

pub mod admissibility;
pub mod advantage;
pub mod gates;
pub mod math;
pub mod objective;
pub mod parallel;
pub mod reward;
pub mod rng;
pub mod toysim;

pub use admissibility::{check_admissibility, check_gate, AdmissibilityReport, ProbeGrid};
pub use advantage::{normalize_advantages, NormalizedAdvantages, RolloutGroup};
pub use gates::{
    gate_derivative, gate_value, gate_weight_for_token, GateError, GateKind, GateSpec, Temperature,
};
pub use objective::{
    batch_objective, gradient_weight, grpo_token_surrogate, hard_clip_indicator,
    sapo_token_surrogate, ObjectiveValue, TokenStep,
};
pub use reward::{answer_reward, format_reward, total_reward, MarkedResponse, Vocab};
pub use toysim::{parse_config, run_training, StepMetrics, TrainConfig};
