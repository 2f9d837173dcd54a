//! Per-token and batch surrogate objectives.
//!
//! The clipped (GRPO-style) surrogate per token is
//! `min(r * A, clip(r, 1-eps, 1+eps) * A)`; the soft (SAPO-style) surrogate
//! replaces the clip with a smooth gate, `f(r) * A`. The batch objective is
//! the mean over groups of the mean over responses of the mean over tokens,
//! so response length does not change a token's relative weight beyond its
//! own response.
//!
//! Gradients are intentionally not automated here: for the soft surrogate
//! the per-token gradient coefficient is the closed form `w * r * A` with
//! `w` the gate derivative at the ratio, which callers apply to their own
//! `grad log pi`. For hard clipping the coefficient is the indicator of the
//! unclipped branch times `r * A`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::advantage::RolloutGroup;
use crate::gates::{gate_value, gate_weight_for_token, GateError, GateKind, GateSpec};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ObjectiveError {
    #[error(transparent)]
    Gate(#[from] GateError),
    #[error("clip epsilon must lie in (0, 1), got {0}")]
    InvalidEpsilon(f64),
    #[error("ratio must be nonnegative and finite, got {0}")]
    InvalidRatio(f64),
    #[error("ratio {ratio} disagrees with exp(logprob_new - logprob_old) = {expected}")]
    RatioMismatch { ratio: f64, expected: f64 },
    #[error("batch shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("batch contains no groups")]
    EmptyBatch,
    #[error("group {group} response {response} has no tokens")]
    EmptyResponse { group: usize, response: usize },
}

/// One token's contribution to the objective: its importance ratio, the
/// log-probabilities that produced it (when known), and its advantage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TokenStep {
    ratio: f64,
    logprob_new: Option<f64>,
    logprob_old: Option<f64>,
    advantage: f64,
}

impl TokenStep {
    pub fn new(ratio: f64, advantage: f64) -> Result<Self, ObjectiveError> {
        if !(ratio.is_finite() && ratio >= 0.0) {
            return Err(ObjectiveError::InvalidRatio(ratio));
        }
        Ok(Self {
            ratio,
            logprob_new: None,
            logprob_old: None,
            advantage,
        })
    }

    /// Build a step from current/snapshot log-probabilities; the ratio is
    /// exp(logprob_new - logprob_old).
    pub fn from_logprobs(
        logprob_new: f64,
        logprob_old: f64,
        advantage: f64,
    ) -> Result<Self, ObjectiveError> {
        let ratio = (logprob_new - logprob_old).exp();
        if !(ratio.is_finite() && ratio >= 0.0) {
            return Err(ObjectiveError::InvalidRatio(ratio));
        }
        Ok(Self {
            ratio,
            logprob_new: Some(logprob_new),
            logprob_old: Some(logprob_old),
            advantage,
        })
    }

    /// As [`TokenStep::from_logprobs`] but with an externally supplied
    /// ratio, which must agree with the log-probabilities to 1e-9.
    pub fn with_ratio_and_logprobs(
        ratio: f64,
        logprob_new: f64,
        logprob_old: f64,
        advantage: f64,
    ) -> Result<Self, ObjectiveError> {
        if !(ratio.is_finite() && ratio >= 0.0) {
            return Err(ObjectiveError::InvalidRatio(ratio));
        }
        let expected = (logprob_new - logprob_old).exp();
        if (ratio - expected).abs() >= 1e-9 {
            return Err(ObjectiveError::RatioMismatch { ratio, expected });
        }
        Ok(Self {
            ratio,
            logprob_new: Some(logprob_new),
            logprob_old: Some(logprob_old),
            advantage,
        })
    }

    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    pub fn advantage(&self) -> f64 {
        self.advantage
    }

    pub fn logprob_new(&self) -> Option<f64> {
        self.logprob_new
    }

    pub fn logprob_old(&self) -> Option<f64> {
        self.logprob_old
    }
}

/// Batch objective value plus the gradient weight actually applied to each
/// token, flattened in (group, response, token) order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveValue {
    pub value: f64,
    pub per_token_weights: Vec<f64>,
}

/// Clipped per-token surrogate min(r*A, clip(r, 1-eps, 1+eps)*A).
pub fn grpo_token_surrogate(
    ratio: f64,
    advantage: f64,
    epsilon: f64,
) -> Result<f64, ObjectiveError> {
    if !(epsilon.is_finite() && epsilon > 0.0 && epsilon < 1.0) {
        return Err(ObjectiveError::InvalidEpsilon(epsilon));
    }
    if !(ratio.is_finite() && ratio >= 0.0) {
        return Err(ObjectiveError::InvalidRatio(ratio));
    }
    let clipped = ratio.clamp(1.0 - epsilon, 1.0 + epsilon);
    Ok((ratio * advantage).min(clipped * advantage))
}

/// Soft per-token surrogate f(r) * A with the temperature picked by the
/// advantage sign.
pub fn sapo_token_surrogate(
    spec: &GateSpec,
    ratio: f64,
    advantage: f64,
) -> Result<f64, ObjectiveError> {
    let tau = spec.temperature().select(advantage);
    let value = gate_value(spec.kind(), tau, ratio)?;
    Ok(value * advantage)
}

/// Gradient weight `w` for one token under a smooth gate; the full
/// per-token gradient coefficient is `w * ratio * advantage`.
pub fn gradient_weight(spec: &GateSpec, step: &TokenStep) -> Result<f64, ObjectiveError> {
    Ok(gate_weight_for_token(spec, step.ratio(), step.advantage())?)
}

/// Effective weight of hard clipping: 1 when the pessimistic min follows
/// the unclipped branch (so gradient flows), else 0. The kink itself
/// resolves to the clipped branch.
pub fn hard_clip_indicator(ratio: f64, advantage: f64, epsilon: f64) -> f64 {
    let clipped_active =
        (advantage > 0.0 && ratio >= 1.0 + epsilon) || (advantage < 0.0 && ratio <= 1.0 - epsilon);
    if clipped_active {
        0.0
    } else {
        1.0
    }
}

/// Double-normalized batch objective: mean over groups of the mean over
/// responses of the mean over tokens of the per-token surrogate.
///
/// `token_steps` mirrors the group/response nesting of `groups`. Group
/// means are reduced sequentially in group order so the result is
/// bit-stable regardless of how callers parallelize around this.
pub fn batch_objective(
    groups: &[RolloutGroup],
    token_steps: &[Vec<Vec<TokenStep>>],
    spec: &GateSpec,
) -> Result<ObjectiveValue, ObjectiveError> {
    if groups.is_empty() {
        return Err(ObjectiveError::EmptyBatch);
    }
    if groups.len() != token_steps.len() {
        return Err(ObjectiveError::ShapeMismatch(format!(
            "{} groups but {} token tables",
            groups.len(),
            token_steps.len()
        )));
    }
    for (g, (group, steps)) in groups.iter().zip(token_steps).enumerate() {
        if group.responses.len() != steps.len() {
            return Err(ObjectiveError::ShapeMismatch(format!(
                "group {g} has {} responses but {} token rows",
                group.responses.len(),
                steps.len()
            )));
        }
        for (i, row) in steps.iter().enumerate() {
            if row.is_empty() {
                return Err(ObjectiveError::EmptyResponse {
                    group: g,
                    response: i,
                });
            }
        }
    }

    let per_group =
        crate::parallel::map_collect(token_steps, |steps| group_mean_and_weights(steps, spec));

    let mut value = 0.0;
    let mut per_token_weights = Vec::new();
    for result in per_group {
        let (mean, weights) = result?;
        value += mean;
        per_token_weights.extend(weights);
    }
    value /= groups.len() as f64;
    Ok(ObjectiveValue {
        value,
        per_token_weights,
    })
}

fn group_mean_and_weights(
    steps: &[Vec<TokenStep>],
    spec: &GateSpec,
) -> Result<(f64, Vec<f64>), ObjectiveError> {
    let mut group_sum = 0.0;
    let mut weights = Vec::with_capacity(steps.iter().map(Vec::len).sum());
    for row in steps {
        let mut response_sum = 0.0;
        for step in row {
            let (surrogate, weight) = match spec.kind() {
                GateKind::HardClip => {
                    let eps = spec.clip_epsilon().expect("hard clip spec carries epsilon");
                    (
                        grpo_token_surrogate(step.ratio(), step.advantage(), eps)?,
                        hard_clip_indicator(step.ratio(), step.advantage(), eps),
                    )
                }
                _ => (
                    sapo_token_surrogate(spec, step.ratio(), step.advantage())?,
                    gradient_weight(spec, step)?,
                ),
            };
            response_sum += surrogate;
            weights.push(weight);
        }
        group_sum += response_sum / row.len() as f64;
    }
    Ok((group_sum / steps.len() as f64, weights))
}
