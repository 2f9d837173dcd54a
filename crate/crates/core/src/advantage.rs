//! Group-relative advantage normalization.
//!
//! A group holds the G responses sampled for one query. Each response's
//! reward is standardized against the group mean and population standard
//! deviation, and every token of a response carries that response-level
//! advantage.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AdvantageError {
    #[error("a rollout group needs at least 2 rewards, got {0}")]
    GroupTooSmall(usize),
    #[error("rewards and responses disagree in length: {rewards} vs {responses}")]
    LengthMismatch { rewards: usize, responses: usize },
    #[error("reward at index {0} is not finite")]
    NonFiniteReward(usize),
}

/// Normalized advantages plus a flag marking zero-variance groups.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdvantages {
    pub advantages: Vec<f64>,
    /// True when every reward in the group was identical; the advantages
    /// are then all zero and the group contributes no gradient.
    pub degenerate: bool,
}

/// Standardize rewards to zero mean and unit population variance.
///
/// Identical rewards would divide by zero, so that case returns all-zero
/// advantages with the degenerate flag set instead of an error; training
/// proceeds and the caller can count the wasted group.
pub fn normalize_advantages(rewards: &[f64]) -> Result<NormalizedAdvantages, AdvantageError> {
    if rewards.len() < 2 {
        return Err(AdvantageError::GroupTooSmall(rewards.len()));
    }
    for (i, r) in rewards.iter().enumerate() {
        if !r.is_finite() {
            return Err(AdvantageError::NonFiniteReward(i));
        }
    }
    if rewards.iter().all(|r| *r == rewards[0]) {
        return Ok(NormalizedAdvantages {
            advantages: vec![0.0; rewards.len()],
            degenerate: true,
        });
    }
    let n = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / n;
    let var = rewards.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    Ok(NormalizedAdvantages {
        advantages: rewards.iter().map(|r| (r - mean) / std).collect(),
        degenerate: false,
    })
}

/// G responses for one query with their rewards and normalized advantages.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutGroup {
    pub query_id: u64,
    /// Token-id sequences, one per response.
    pub responses: Vec<Vec<u32>>,
    pub rewards: Vec<f64>,
    /// One advantage per response, shared by all of its tokens.
    pub advantages: Vec<f64>,
    pub degenerate: bool,
}

impl RolloutGroup {
    pub fn new(
        query_id: u64,
        responses: Vec<Vec<u32>>,
        rewards: Vec<f64>,
    ) -> Result<Self, AdvantageError> {
        if responses.len() != rewards.len() {
            return Err(AdvantageError::LengthMismatch {
                rewards: rewards.len(),
                responses: responses.len(),
            });
        }
        let normalized = normalize_advantages(&rewards)?;
        Ok(Self {
            query_id,
            responses,
            rewards,
            advantages: normalized.advantages,
            degenerate: normalized.degenerate,
        })
    }

    pub fn group_size(&self) -> usize {
        self.rewards.len()
    }
}
