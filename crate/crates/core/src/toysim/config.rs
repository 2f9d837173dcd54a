//! Simulator configuration and its declarative key-value file format.
//!
//! The file is line-oriented `key = value` with `#` comments. Keys match
//! the [`TrainConfig`] fields exactly:
//!
//! ```text
//! gate = sigmoid            # hard_clip | sigmoid | erf | arctan | softsign
//! group_size = 8
//! updates_per_batch = 2
//! queries_per_batch = 4
//! max_len = 12
//! learning_rate = 0.5
//! steps = 200
//! seed = 0
//! tau_pos = 1.0
//! tau_neg = 1.0
//! task = answer             # answer | random_reward
//! # epsilon = 0.2           # required iff gate = hard_clip
//! ```
//!
//! Every key is optional except that `epsilon` must be present exactly
//! when `gate = hard_clip`. Unknown keys are an error listing the
//! offenders.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::gates::{GateError, GateKind, GateSpec, Temperature};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("unknown configuration keys: {}", .0.join(", "))]
    UnknownKeys(Vec<String>),
    #[error("line {line} is not `key = value`: {content:?}")]
    BadLine { line: usize, content: String },
    #[error("invalid value {value:?} for key {key}: {reason}")]
    InvalidValue {
        key: String,
        value: String,
        reason: String,
    },
    #[error("gate = hard_clip requires an epsilon key")]
    MissingEpsilon,
    #[error("epsilon is only meaningful with gate = hard_clip")]
    EpsilonForbidden,
    #[error("{field}: {reason}")]
    InvalidField { field: &'static str, reason: String },
    #[error(transparent)]
    Gate(#[from] GateError),
}

/// Reward regime of the toy task.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskKind {
    /// Each query has a fixed ground-truth answer token; reward is the
    /// structured format + answer score.
    Answer,
    /// Reward is uniform noise independent of the response; useful as a
    /// no-signal control.
    RandomReward,
}

/// Full simulator configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub gate: GateSpec,
    pub group_size: usize,
    pub updates_per_batch: usize,
    pub queries_per_batch: usize,
    pub max_len: usize,
    pub learning_rate: f64,
    pub steps: usize,
    pub seed: u64,
    pub task: TaskKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            gate: GateSpec::smooth(
                GateKind::Sigmoid,
                Temperature::symmetric(1.0).expect("1.0 is a valid temperature"),
            )
            .expect("sigmoid is smooth"),
            group_size: 8,
            updates_per_batch: 2,
            queries_per_batch: 4,
            max_len: 12,
            learning_rate: 2.0,
            steps: 200,
            seed: 0,
            task: TaskKind::Answer,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.group_size < 2 {
            return Err(ConfigError::InvalidField {
                field: "group_size",
                reason: format!("must be at least 2, got {}", self.group_size),
            });
        }
        if self.updates_per_batch < 1 {
            return Err(ConfigError::InvalidField {
                field: "updates_per_batch",
                reason: "must be at least 1".into(),
            });
        }
        if self.queries_per_batch < 1 {
            return Err(ConfigError::InvalidField {
                field: "queries_per_batch",
                reason: "must be at least 1".into(),
            });
        }
        // Four markers plus at least one answer token and one spare.
        if self.max_len < 6 {
            return Err(ConfigError::InvalidField {
                field: "max_len",
                reason: format!("must be at least 6, got {}", self.max_len),
            });
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(ConfigError::InvalidField {
                field: "learning_rate",
                reason: format!("must be positive and finite, got {}", self.learning_rate),
            });
        }
        Ok(())
    }

    /// Same configuration with a different gate; used by gate comparisons.
    pub fn with_gate(mut self, gate: GateSpec) -> Self {
        self.gate = gate;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

const KNOWN_KEYS: [&str; 12] = [
    "gate",
    "group_size",
    "updates_per_batch",
    "queries_per_batch",
    "max_len",
    "learning_rate",
    "steps",
    "seed",
    "tau_pos",
    "tau_neg",
    "epsilon",
    "task",
];

/// Parse a configuration from the key-value text format; missing keys take
/// their defaults.
pub fn parse_config(text: &str) -> Result<TrainConfig, ConfigError> {
    let mut entries: BTreeMap<String, String> = BTreeMap::new();
    let mut unknown = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError::BadLine {
                line: idx + 1,
                content: raw.to_string(),
            });
        };
        let key = key.trim().to_string();
        if !KNOWN_KEYS.contains(&key.as_str()) {
            unknown.push(key);
            continue;
        }
        entries.insert(key, value.trim().to_string());
    }
    if !unknown.is_empty() {
        unknown.sort();
        unknown.dedup();
        return Err(ConfigError::UnknownKeys(unknown));
    }

    fn get<T: std::str::FromStr>(
        entries: &BTreeMap<String, String>,
        key: &str,
        default: T,
    ) -> Result<T, ConfigError> {
        match entries.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| ConfigError::InvalidValue {
                key: key.to_string(),
                value: v.clone(),
                reason: format!("expected a {}", std::any::type_name::<T>()),
            }),
        }
    }

    let defaults = TrainConfig::default();
    let kind: GateKind = match entries.get("gate") {
        None => GateKind::Sigmoid,
        Some(v) => v
            .parse()
            .map_err(|e: GateError| ConfigError::InvalidValue {
                key: "gate".into(),
                value: v.clone(),
                reason: e.to_string(),
            })?,
    };
    let tau_pos = get(&entries, "tau_pos", 1.0)?;
    let tau_neg = get(&entries, "tau_neg", 1.0)?;
    let epsilon = entries
        .get("epsilon")
        .map(|v| {
            v.parse::<f64>().map_err(|_| ConfigError::InvalidValue {
                key: "epsilon".into(),
                value: v.clone(),
                reason: "expected a real number".into(),
            })
        })
        .transpose()?;

    let temperature = Temperature::new(tau_pos, tau_neg)?;
    let gate = match (kind, epsilon) {
        // Temperatures are unused under hard clipping but carried so gate
        // comparisons can swap in a smooth gate with the configured taus.
        (GateKind::HardClip, Some(eps)) => GateSpec::hard_clip(eps)?.with_temperature(temperature),
        (GateKind::HardClip, None) => return Err(ConfigError::MissingEpsilon),
        (_, Some(_)) => return Err(ConfigError::EpsilonForbidden),
        (kind, None) => GateSpec::smooth(kind, temperature)?,
    };

    let task = match entries.get("task").map(String::as_str) {
        None => defaults.task,
        Some("answer") => TaskKind::Answer,
        Some("random_reward") => TaskKind::RandomReward,
        Some(v) => {
            return Err(ConfigError::InvalidValue {
                key: "task".into(),
                value: v.to_string(),
                reason: "expected answer or random_reward".into(),
            })
        }
    };

    let config = TrainConfig {
        gate,
        group_size: get(&entries, "group_size", defaults.group_size)?,
        updates_per_batch: get(&entries, "updates_per_batch", defaults.updates_per_batch)?,
        queries_per_batch: get(&entries, "queries_per_batch", defaults.queries_per_batch)?,
        max_len: get(&entries, "max_len", defaults.max_len)?,
        learning_rate: get(&entries, "learning_rate", defaults.learning_rate)?,
        steps: get(&entries, "steps", defaults.steps)?,
        seed: get(&entries, "seed", defaults.seed)?,
        task,
    };
    config.validate()?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let config = TrainConfig::default();
        assert!(config.validate().is_ok());
        assert_eq!(config.gate.kind(), GateKind::Sigmoid);
        assert_eq!(parse_config("").unwrap(), config);
    }

    #[test]
    fn parses_full_file() {
        let text = "\
# comment
gate = arctan
group_size = 4
updates_per_batch = 3
queries_per_batch = 2
max_len = 10
learning_rate = 0.25   # inline comment
steps = 50
seed = 9
tau_pos = 2.0
tau_neg = 8.0
task = random_reward
";
        let config = parse_config(text).unwrap();
        assert_eq!(config.gate.kind(), GateKind::Arctan);
        assert_eq!(config.gate.temperature().tau_pos(), 2.0);
        assert_eq!(config.gate.temperature().tau_neg(), 8.0);
        assert_eq!(config.group_size, 4);
        assert_eq!(config.updates_per_batch, 3);
        assert_eq!(config.steps, 50);
        assert_eq!(config.seed, 9);
        assert_eq!(config.task, TaskKind::RandomReward);
    }

    #[test]
    fn unknown_keys_are_listed() {
        let err = parse_config("gate = erf\nbogus = 1\nrate = 2\n").unwrap_err();
        match err {
            ConfigError::UnknownKeys(keys) => assert_eq!(keys, vec!["bogus", "rate"]),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn hard_clip_epsilon_rules() {
        assert_eq!(
            parse_config("gate = hard_clip\n"),
            Err(ConfigError::MissingEpsilon)
        );
        let config = parse_config("gate = hard_clip\nepsilon = 0.2\n").unwrap();
        assert_eq!(config.gate.clip_epsilon(), Some(0.2));
        assert_eq!(
            parse_config("gate = erf\nepsilon = 0.2\n"),
            Err(ConfigError::EpsilonForbidden)
        );
    }

    #[test]
    fn invalid_values_name_the_key() {
        let err = parse_config("group_size = many\n").unwrap_err();
        assert!(matches!(err, ConfigError::InvalidValue { ref key, .. } if key == "group_size"));
        let err = parse_config("group_size = 1\n").unwrap_err();
        assert!(matches!(
            err,
            ConfigError::InvalidField {
                field: "group_size",
                ..
            }
        ));
        let err = parse_config("tau_pos = -1\n").unwrap_err();
        assert!(matches!(err, ConfigError::Gate(_)));
        let err = parse_config("just a line\n").unwrap_err();
        assert!(matches!(err, ConfigError::BadLine { line: 1, .. }));
    }
}
