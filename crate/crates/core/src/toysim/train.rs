//! Group sampling, gradient accumulation, and the per-step metric stream.

use std::collections::BTreeSet;

use crate::advantage::RolloutGroup;
use crate::gates::{gate_weight_for_token, GateKind, GateSpec};
use crate::objective::hard_clip_indicator;
use crate::parallel;
use crate::reward::{total_reward, MarkedResponse, Vocab, ANSWER_CLOSE};
use crate::rng::StepRng;

use super::policy::{policy_entropy, Context, TabularPolicy};
use super::{SimError, TaskKind, TrainConfig};

/// Counter slot for the reward draw of the random-reward task; token draws
/// use positions 0..max_len.
const REWARD_DRAW_SLOT: u64 = u64::MAX;

/// Gradient weights below this count a token as suppressed.
const SUPPRESSION_THRESHOLD: f64 = 0.1;

/// The toy task: each query has one fixed ground-truth content token.
#[derive(Debug, Clone)]
pub struct Task {
    vocab: Vocab,
    kind: TaskKind,
    answers: Vec<u32>,
}

impl Task {
    /// A task over an explicit vocabulary with one ground-truth content
    /// token per query.
    pub fn new(vocab: Vocab, kind: TaskKind, answers: Vec<u32>) -> Self {
        debug_assert!(answers
            .iter()
            .all(|&t| !vocab.is_marker(t) && (t as usize) < vocab.size()));
        Self {
            vocab,
            kind,
            answers,
        }
    }

    /// Ground-truth answers assigned round-robin over the content tokens.
    pub fn from_config(config: &TrainConfig) -> Self {
        let vocab = Vocab::default();
        let answers = (0..config.queries_per_batch)
            .map(|q| vocab.content_token(q % vocab.content_count()))
            .collect();
        Self {
            vocab,
            kind: config.task,
            answers,
        }
    }

    pub fn vocab(&self) -> Vocab {
        self.vocab
    }

    pub fn num_queries(&self) -> usize {
        self.answers.len()
    }

    pub fn ground_truth(&self, query: usize) -> String {
        self.vocab.render_token(self.answers[query])
    }

    fn reward(&self, query: usize, rollout: usize, tokens: &[u32], rng: &StepRng) -> f64 {
        match self.kind {
            TaskKind::Answer => {
                let response = MarkedResponse::from_tokens(self.vocab, tokens.to_vec())
                    .expect("sampled tokens are in-vocabulary");
                total_reward(&response, &self.ground_truth(query))
            }
            TaskKind::RandomReward => {
                2.0 * rng.uniform(query as u64, rollout as u64, REWARD_DRAW_SLOT)
            }
        }
    }
}

/// A rollout group together with the per-token log-probabilities recorded
/// under the behavior snapshot that sampled it.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledGroup {
    pub group: RolloutGroup,
    /// `old_logprobs[i][t]` is log pi_old of token t of response i.
    pub old_logprobs: Vec<Vec<f64>>,
}

/// Observables for one training step, measured after the final update.
#[derive(Debug, Clone, PartialEq)]
pub struct StepMetrics {
    pub step: u64,
    pub mean_reward: f64,
    /// Mean Shannon entropy (nats) over contexts visited in this batch.
    pub policy_entropy: f64,
    pub ratio_mean: f64,
    pub ratio_var: f64,
    /// Max |ratio - 1| over the measured update's tokens.
    pub ratio_max_dev: f64,
    /// Fraction of tokens whose gradient weight fell below 0.1.
    pub suppression_rate: f64,
    pub degenerate_group_rate: f64,
}

/// Sample G responses for one query from the snapshot policy.
///
/// Responses terminate at the `</answer>` token or at `max_len`. Rewards
/// and normalized advantages are filled in, and the snapshot log-prob of
/// every sampled token is recorded for later off-policy updates.
pub fn sample_group(
    policy: &TabularPolicy,
    task: &Task,
    query: usize,
    group_size: usize,
    max_len: usize,
    rng: &StepRng,
) -> Result<SampledGroup, SimError> {
    if max_len > policy.max_len() {
        return Err(SimError::SampleTooLong {
            requested: max_len,
            max: policy.max_len(),
        });
    }
    if query >= policy.num_queries() {
        return Err(SimError::QueryOutOfRange {
            query,
            num_queries: policy.num_queries(),
        });
    }
    let mut responses = Vec::with_capacity(group_size);
    let mut old_logprobs = Vec::with_capacity(group_size);
    let mut rewards = Vec::with_capacity(group_size);
    for rollout in 0..group_size {
        let mut tokens = Vec::new();
        let mut logprobs = Vec::new();
        let mut prev = policy.bos();
        for position in 0..max_len {
            let ctx = Context {
                query,
                position,
                prev,
            };
            let u = rng.uniform(query as u64, rollout as u64, position as u64);
            let token = policy.sample(ctx, u);
            logprobs.push(policy.log_softmax(ctx)[token as usize]);
            tokens.push(token);
            prev = token as usize;
            if token == ANSWER_CLOSE {
                break;
            }
        }
        rewards.push(task.reward(query, rollout, &tokens, rng));
        responses.push(tokens);
        old_logprobs.push(logprobs);
    }
    Ok(SampledGroup {
        group: RolloutGroup::new(query as u64, responses, rewards)?,
        old_logprobs,
    })
}

/// Per-update ratio and suppression statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateStats {
    pub ratio_mean: f64,
    pub ratio_var: f64,
    pub ratio_max_dev: f64,
    pub suppression_rate: f64,
}

/// Ascent gradient of the double-normalized batch surrogate with respect
/// to the policy logits, as a dense table aligned with
/// [`TabularPolicy::parameters`].
///
/// Each token contributes `w * r * A` on the log-softmax gradient
/// `(onehot - probs)`, scaled by 1/(G |o_i| Q): `w` is the gate derivative
/// at the token's ratio for smooth gates, or the unclipped-branch
/// indicator for hard clipping.
pub fn batch_gradient(
    policy: &TabularPolicy,
    batch: &[SampledGroup],
    gate: &GateSpec,
) -> Result<(Vec<f64>, UpdateStats), SimError> {
    if batch.is_empty() {
        return Err(SimError::EmptyBatch);
    }
    let num_queries = batch.len() as f64;
    let mut grad = vec![0.0; policy.num_parameters()];
    let mut ratio_sum = 0.0;
    let mut ratio_sq_sum = 0.0;
    let mut max_dev = 0.0_f64;
    let mut suppressed = 0usize;
    let mut tokens_seen = 0usize;
    for sampled in batch {
        let query = sampled.group.query_id as usize;
        let group_size = sampled.group.group_size() as f64;
        for (i, tokens) in sampled.group.responses.iter().enumerate() {
            let advantage = sampled.group.advantages[i];
            let scale = 1.0 / (group_size * tokens.len() as f64 * num_queries);
            let mut prev = policy.bos();
            for (position, &token) in tokens.iter().enumerate() {
                let ctx = Context {
                    query,
                    position,
                    prev,
                };
                let log_probs = policy.log_softmax(ctx);
                let ratio = (log_probs[token as usize] - sampled.old_logprobs[i][position]).exp();
                let weight = match gate.kind() {
                    GateKind::HardClip => {
                        let eps = gate.clip_epsilon().expect("hard clip carries epsilon");
                        hard_clip_indicator(ratio, advantage, eps)
                    }
                    _ => gate_weight_for_token(gate, ratio, advantage)?,
                };
                ratio_sum += ratio;
                ratio_sq_sum += ratio * ratio;
                max_dev = max_dev.max((ratio - 1.0).abs());
                if weight < SUPPRESSION_THRESHOLD {
                    suppressed += 1;
                }
                tokens_seen += 1;

                let coefficient = weight * ratio * advantage * scale;
                let row = policy.parameter_index(ctx, 0);
                for (t, lp) in log_probs.iter().enumerate() {
                    let indicator = if t == token as usize { 1.0 } else { 0.0 };
                    grad[row + t] += coefficient * (indicator - lp.exp());
                }
                prev = token as usize;
            }
        }
    }
    let n = tokens_seen as f64;
    let ratio_mean = ratio_sum / n;
    let stats = UpdateStats {
        ratio_mean,
        ratio_var: (ratio_sq_sum / n - ratio_mean * ratio_mean).max(0.0),
        ratio_max_dev: max_dev,
        suppression_rate: suppressed as f64 / n,
    };
    Ok((grad, stats))
}

/// One protocol step: snapshot, sample, score, then `updates_per_batch`
/// ascent updates reusing the sampled trajectories.
///
/// Ratio and suppression statistics are measured on the second update's
/// tokens (the first is on-policy by construction, all ratios exactly 1);
/// with a single update per batch they describe that on-policy update.
pub fn train_step(
    policy: &mut TabularPolicy,
    config: &TrainConfig,
    task: &Task,
    step: u64,
) -> Result<StepMetrics, SimError> {
    config.validate()?;
    let snapshot = policy.clone();
    let rng = StepRng::new(config.seed, step);
    let batch: Vec<SampledGroup> = parallel::map_range(config.queries_per_batch, |query| {
        sample_group(
            &snapshot,
            task,
            query,
            config.group_size,
            config.max_len,
            &rng,
        )
    })
    .into_iter()
    .collect::<Result<_, _>>()?;

    let total_rollouts = (config.queries_per_batch * config.group_size) as f64;
    let mean_reward = batch
        .iter()
        .flat_map(|s| s.group.rewards.iter())
        .sum::<f64>()
        / total_rollouts;
    let degenerate_group_rate = batch.iter().filter(|s| s.group.degenerate).count() as f64
        / config.queries_per_batch as f64;

    let mut visited = BTreeSet::new();
    for sampled in &batch {
        let query = sampled.group.query_id as usize;
        for tokens in &sampled.group.responses {
            let mut prev = policy.bos();
            for (position, &token) in tokens.iter().enumerate() {
                visited.insert(Context {
                    query,
                    position,
                    prev,
                });
                prev = token as usize;
            }
        }
    }
    let visited: Vec<Context> = visited.into_iter().collect();

    let measure_idx = if config.updates_per_batch >= 2 { 1 } else { 0 };
    let mut measured: Option<UpdateStats> = None;
    for update in 0..config.updates_per_batch {
        let (grad, stats) = batch_gradient(policy, &batch, &config.gate)?;
        if update == measure_idx {
            measured = Some(stats);
        }
        for (z, g) in policy.parameters_mut().iter_mut().zip(&grad) {
            *z += config.learning_rate * g;
        }
        if !policy.all_finite() {
            return Err(SimError::Diverged { step });
        }
    }
    let stats = measured.expect("at least one update ran");

    Ok(StepMetrics {
        step,
        mean_reward,
        policy_entropy: policy_entropy(policy, &visited)?,
        ratio_mean: stats.ratio_mean,
        ratio_var: stats.ratio_var,
        ratio_max_dev: stats.ratio_max_dev,
        suppression_rate: stats.suppression_rate,
        degenerate_group_rate,
    })
}

/// Run `config.steps` training steps, passing each step's metrics to the
/// sink as they complete. A divergence abort carries the failing step.
pub fn run_training_streaming(
    config: &TrainConfig,
    mut on_step: impl FnMut(&StepMetrics),
) -> Result<(), SimError> {
    config.validate()?;
    let task = Task::from_config(config);
    let mut policy =
        TabularPolicy::new_uniform(config.queries_per_batch, config.max_len, task.vocab());
    for step in 0..config.steps {
        let metrics = train_step(&mut policy, config, &task, step as u64)?;
        on_step(&metrics);
    }
    Ok(())
}

/// As [`run_training_streaming`], collecting the full metric stream.
///
/// ```
/// use softgate::toysim::{run_training, TrainConfig};
///
/// let config = TrainConfig { steps: 3, seed: 42, ..TrainConfig::default() };
/// let metrics = run_training(&config)?;
/// assert_eq!(metrics.len(), 3);
/// // Equal configurations reproduce the stream exactly.
/// assert_eq!(run_training(&config)?, metrics);
/// # Ok::<(), softgate::toysim::SimError>(())
/// ```
pub fn run_training(config: &TrainConfig) -> Result<Vec<StepMetrics>, SimError> {
    let mut metrics = Vec::with_capacity(config.steps);
    run_training_streaming(config, |m| metrics.push(m.clone()))?;
    Ok(metrics)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gates::Temperature;

    fn small_config() -> TrainConfig {
        TrainConfig {
            group_size: 4,
            queries_per_batch: 2,
            max_len: 8,
            steps: 5,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn one_hot_policy_yields_degenerate_groups_and_no_update() {
        let config = small_config();
        let task = Task::from_config(&config);
        let mut policy =
            TabularPolicy::new_uniform(config.queries_per_batch, config.max_len, task.vocab());
        // Deterministic policy: always emit content token 0.
        let hot = task.vocab().content_token(0) as usize;
        for q in 0..config.queries_per_batch {
            for pos in 0..config.max_len {
                for prev in 0..=task.vocab().size() {
                    policy.row_mut(Context {
                        query: q,
                        position: pos,
                        prev,
                    })[hot] = 50.0;
                }
            }
        }
        let rng = StepRng::new(1, 0);
        let sampled = sample_group(&policy, &task, 0, 4, config.max_len, &rng).unwrap();
        assert!(sampled.group.degenerate);
        let first = &sampled.group.responses[0];
        assert!(sampled.group.responses.iter().all(|r| r == first));

        let before = policy.parameters().to_vec();
        let metrics = train_step(&mut policy, &config, &task, 0).unwrap();
        assert_eq!(policy.parameters(), &before[..]);
        assert_eq!(metrics.degenerate_group_rate, 1.0);
    }

    #[test]
    fn sampling_is_reproducible() {
        let config = small_config();
        let task = Task::from_config(&config);
        let policy =
            TabularPolicy::new_uniform(config.queries_per_batch, config.max_len, task.vocab());
        let rng = StepRng::new(42, 7);
        let a = sample_group(&policy, &task, 1, 4, 6, &rng).unwrap();
        let b = sample_group(&policy, &task, 1, 4, 6, &rng).unwrap();
        assert_eq!(a, b);
        // Different seed changes the draw.
        let c = sample_group(&policy, &task, 1, 4, 6, &StepRng::new(43, 7)).unwrap();
        assert_ne!(a, c);
        // Responses stop at </answer> or max_len.
        for tokens in &a.group.responses {
            assert!(!tokens.is_empty() && tokens.len() <= 6);
            for (i, &t) in tokens.iter().enumerate() {
                if t == ANSWER_CLOSE {
                    assert_eq!(i, tokens.len() - 1);
                }
            }
        }
        // Rewards stay within the structured-reward range.
        for &r in &a.group.rewards {
            assert!((0.0..=2.0).contains(&r));
        }
    }

    #[test]
    fn small_vocabulary_sampling_is_reproducible() {
        // Uniform policy over an 8-token vocabulary, short responses.
        let vocab = Vocab::new(4);
        let task = Task::new(vocab, TaskKind::Answer, vec![vocab.content_token(0); 2]);
        let policy = TabularPolicy::new_uniform(2, 4, vocab);
        let rng = StepRng::new(123, 0);
        let a = sample_group(&policy, &task, 0, 4, 4, &rng).unwrap();
        let b = sample_group(&policy, &task, 0, 4, 4, &rng).unwrap();
        assert_eq!(a, b);
        assert!(a.group.responses.iter().all(|r| r.len() <= 4));
        assert!(a
            .group
            .responses
            .iter()
            .flatten()
            .all(|&t| (t as usize) < vocab.size()));
        // Asking for more tokens than the policy table holds is an error.
        assert!(matches!(
            sample_group(&policy, &task, 0, 4, 9, &rng),
            Err(SimError::SampleTooLong { .. })
        ));
    }

    #[test]
    fn first_update_is_on_policy() {
        let mut config = small_config();
        config.updates_per_batch = 1;
        let task = Task::from_config(&config);
        let mut policy =
            TabularPolicy::new_uniform(config.queries_per_batch, config.max_len, task.vocab());
        let metrics = train_step(&mut policy, &config, &task, 0).unwrap();
        assert_eq!(metrics.ratio_mean, 1.0);
        assert_eq!(metrics.ratio_var, 0.0);
        assert_eq!(metrics.ratio_max_dev, 0.0);
        assert_eq!(metrics.suppression_rate, 0.0);
    }

    #[test]
    fn second_update_moves_off_policy() {
        let config = small_config();
        let task = Task::from_config(&config);
        let mut policy =
            TabularPolicy::new_uniform(config.queries_per_batch, config.max_len, task.vocab());
        let metrics = train_step(&mut policy, &config, &task, 0).unwrap();
        assert!(metrics.ratio_max_dev > 0.0, "{metrics:?}");
    }

    #[test]
    fn training_is_deterministic() {
        let config = TrainConfig {
            steps: 10,
            ..small_config()
        };
        let a = run_training(&config).unwrap();
        let b = run_training(&config).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 10);
        let c = run_training(&config.with_seed(99)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn zero_steps_is_empty() {
        let config = TrainConfig {
            steps: 0,
            ..small_config()
        };
        assert!(run_training(&config).unwrap().is_empty());
    }

    #[test]
    fn on_policy_updates_match_across_smooth_gates() {
        let mut streams = Vec::new();
        for kind in GateKind::SMOOTH {
            let config = TrainConfig {
                updates_per_batch: 1,
                steps: 6,
                gate: GateSpec::smooth(kind, Temperature::symmetric(3.0).unwrap()).unwrap(),
                ..small_config()
            };
            streams.push(run_training(&config).unwrap());
        }
        for other in &streams[1..] {
            assert_eq!(&streams[0], other);
        }
    }

    #[test]
    fn hard_clip_runs_and_differs_from_smooth_on_second_update() {
        let base = small_config();
        let clip = TrainConfig {
            gate: GateSpec::hard_clip(0.05).unwrap(),
            steps: 8,
            ..base
        };
        let sigmoid = TrainConfig {
            gate: GateSpec::smooth(GateKind::Sigmoid, Temperature::symmetric(10.0).unwrap())
                .unwrap(),
            steps: 8,
            ..base
        };
        let a = run_training(&clip).unwrap();
        let b = run_training(&sigmoid).unwrap();
        assert_eq!(a.len(), 8);
        // Identical sampling, differing gradients once off-policy.
        assert_eq!(a[0].mean_reward, b[0].mean_reward);
        assert_ne!(a, b);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn any_gate() -> impl Strategy<Value = GateSpec> {
            prop_oneof![
                (0usize..4, 0.5f64..10.0, 0.5f64..10.0).prop_map(|(k, tp, tn)| {
                    GateSpec::smooth(GateKind::SMOOTH[k], Temperature::new(tp, tn).unwrap())
                        .unwrap()
                }),
                (0.05f64..0.9).prop_map(|eps| GateSpec::hard_clip(eps).unwrap()),
            ]
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]

            // Equal configurations give equal metric streams, whatever the
            // configuration is.
            #[test]
            fn runs_are_deterministic_across_the_config_space(
                gate in any_gate(),
                group_size in 2usize..6,
                queries in 1usize..4,
                max_len in 6usize..11,
                updates in 1usize..4,
                lr in 0.1f64..5.0,
                seed in 0u64..1000,
            ) {
                let config = TrainConfig {
                    gate,
                    group_size,
                    queries_per_batch: queries,
                    max_len,
                    updates_per_batch: updates,
                    learning_rate: lr,
                    steps: 3,
                    seed,
                    task: TaskKind::Answer,
                };
                let a = run_training(&config).unwrap();
                let b = run_training(&config).unwrap();
                prop_assert_eq!(&a, &b);
                for m in &a {
                    prop_assert!(m.mean_reward.is_finite() && m.policy_entropy.is_finite());
                    prop_assert!((0.0..=1.0).contains(&m.suppression_rate));
                    prop_assert!((0.0..=1.0).contains(&m.degenerate_group_rate));
                }
            }
        }
    }
}
