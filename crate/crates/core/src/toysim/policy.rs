//! First-order-Markov tabular policy.
//!
//! One logit row per (query, position, previous token) context; the row is
//! a distribution over the vocabulary after softmax. Conditioning on the
//! previous token keeps the table small while still making importance
//! ratios nontrivial once the policy moves off its snapshot.

use crate::reward::Vocab;

use super::SimError;

/// A sampling context: which query, which position, and the previously
/// emitted token (`prev == vocab.size()` is the begin-of-sequence slot).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Context {
    pub query: usize,
    pub position: usize,
    pub prev: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TabularPolicy {
    num_queries: usize,
    max_len: usize,
    vocab: Vocab,
    /// Row-major logits: [query][position][prev][token].
    logits: Vec<f64>,
}

impl TabularPolicy {
    /// All-zero logits: uniform over the vocabulary in every context.
    pub fn new_uniform(num_queries: usize, max_len: usize, vocab: Vocab) -> Self {
        let rows = num_queries * max_len * (vocab.size() + 1);
        Self {
            num_queries,
            max_len,
            vocab,
            logits: vec![0.0; rows * vocab.size()],
        }
    }

    pub fn num_queries(&self) -> usize {
        self.num_queries
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn vocab(&self) -> Vocab {
        self.vocab
    }

    /// Begin-of-sequence value for `Context::prev`.
    pub fn bos(&self) -> usize {
        self.vocab.size()
    }

    pub fn num_parameters(&self) -> usize {
        self.logits.len()
    }

    fn row_start(&self, ctx: Context) -> usize {
        let v = self.vocab.size();
        debug_assert!(ctx.query < self.num_queries);
        debug_assert!(ctx.position < self.max_len);
        debug_assert!(ctx.prev <= v);
        ((ctx.query * self.max_len + ctx.position) * (v + 1) + ctx.prev) * v
    }

    pub fn row(&self, ctx: Context) -> &[f64] {
        let start = self.row_start(ctx);
        &self.logits[start..start + self.vocab.size()]
    }

    pub fn row_mut(&mut self, ctx: Context) -> &mut [f64] {
        let start = self.row_start(ctx);
        let v = self.vocab.size();
        &mut self.logits[start..start + v]
    }

    /// Flat parameter view, matching the gradient table layout.
    pub fn parameters(&self) -> &[f64] {
        &self.logits
    }

    pub fn parameters_mut(&mut self) -> &mut [f64] {
        &mut self.logits
    }

    /// Flat index of one logit, for finite-difference probes.
    pub fn parameter_index(&self, ctx: Context, token: u32) -> usize {
        self.row_start(ctx) + token as usize
    }

    pub fn log_softmax(&self, ctx: Context) -> Vec<f64> {
        let row = self.row(ctx);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
        row.iter().map(|z| z - lse).collect()
    }

    pub fn probs(&self, ctx: Context) -> Vec<f64> {
        self.log_softmax(ctx).iter().map(|lp| lp.exp()).collect()
    }

    /// Inverse-CDF sample from the context distribution given u in [0, 1).
    pub fn sample(&self, ctx: Context, u: f64) -> u32 {
        let probs = self.probs(ctx);
        let mut cum = 0.0;
        for (t, p) in probs.iter().enumerate() {
            cum += p;
            if u < cum {
                return t as u32;
            }
        }
        (probs.len() - 1) as u32
    }

    /// Shannon entropy (nats) of the context distribution.
    pub fn entropy(&self, ctx: Context) -> f64 {
        self.log_softmax(ctx)
            .iter()
            .map(|&lp| {
                let p = lp.exp();
                if p > 0.0 {
                    -p * lp
                } else {
                    0.0
                }
            })
            .sum()
    }

    pub fn all_finite(&self) -> bool {
        self.logits.iter().all(|z| z.is_finite())
    }
}

/// Mean entropy (nats) over a set of contexts.
pub fn policy_entropy(policy: &TabularPolicy, contexts: &[Context]) -> Result<f64, SimError> {
    if contexts.is_empty() {
        return Err(SimError::EmptyContexts);
    }
    let sum: f64 = contexts.iter().map(|&ctx| policy.entropy(ctx)).sum();
    Ok(sum / contexts.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(query: usize, position: usize, prev: usize) -> Context {
        Context {
            query,
            position,
            prev,
        }
    }

    #[test]
    fn uniform_policy_probabilities() {
        let vocab = Vocab::new(4); // V = 8
        let policy = TabularPolicy::new_uniform(2, 4, vocab);
        let p = policy.probs(ctx(0, 0, policy.bos()));
        assert_eq!(p.len(), 8);
        for &pi in &p {
            assert!((pi - 0.125).abs() < 1e-15);
        }
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn softmax_rows_normalize() {
        let vocab = Vocab::default();
        let mut policy = TabularPolicy::new_uniform(1, 3, vocab);
        let c = ctx(0, 1, 5);
        policy.row_mut(c).copy_from_slice(&[
            3.0, -2.0, 0.5, 7.0, -1.0, 0.0, 2.0, 1.5, -3.0, 4.0, 0.25, -0.5,
        ]);
        let sum: f64 = policy.probs(c).iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        let lp = policy.log_softmax(c);
        assert!(lp.iter().all(|l| *l < 0.0));
    }

    #[test]
    fn entropy_anchors() {
        let vocab = Vocab::new(4); // V = 8
        let mut policy = TabularPolicy::new_uniform(1, 2, vocab);
        let uniform = ctx(0, 0, policy.bos());
        assert!((policy.entropy(uniform) - 8.0_f64.ln()).abs() < 1e-12);

        let hot = ctx(0, 1, 0);
        policy.row_mut(hot)[3] = 1e4;
        assert_eq!(policy.entropy(hot), 0.0);

        let mean = policy_entropy(&policy, &[uniform, hot]).unwrap();
        assert!((mean - 8.0_f64.ln() / 2.0).abs() < 1e-12);

        assert!(matches!(
            policy_entropy(&policy, &[]),
            Err(SimError::EmptyContexts)
        ));
    }

    #[test]
    fn sampling_respects_distribution() {
        let vocab = Vocab::default();
        let mut policy = TabularPolicy::new_uniform(1, 2, vocab);
        let c = ctx(0, 0, policy.bos());
        policy.row_mut(c)[7] = 1e4; // effectively one-hot
        for u in [0.0, 0.3, 0.7, 0.999_999] {
            assert_eq!(policy.sample(c, u), 7);
        }
        // Uniform row: u picks the bucket directly.
        let c2 = ctx(0, 1, 0);
        assert_eq!(policy.sample(c2, 0.0), 0);
        assert_eq!(policy.sample(c2, 0.999_999), 11);
    }
}
