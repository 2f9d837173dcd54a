//! Two-part reward over structured responses.
//!
//! Responses are token sequences over a toy vocabulary of four reserved
//! marker tokens (`<think>`, `</think>`, `<answer>`, `</answer>`) plus K
//! content tokens. The format component scores how closely a response
//! follows the template `<think> T </think> <answer> A </answer>` in four
//! tiers (1, 0.5, 0.25, 0, applied top-down); the answer component pays 1
//! when the text between the first well-ordered answer-marker pair equals
//! the ground truth after whitespace trimming. The total is their sum,
//! in [0, 2].

use thiserror::Error;

/// Reserved marker token ids.
pub const THINK_OPEN: u32 = 0;
pub const THINK_CLOSE: u32 = 1;
pub const ANSWER_OPEN: u32 = 2;
pub const ANSWER_CLOSE: u32 = 3;

const MARKER_STRINGS: [&str; 4] = ["<think>", "</think>", "<answer>", "</answer>"];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VocabError {
    #[error("unknown token {0:?}")]
    UnknownToken(String),
    #[error("token id {id} out of range for vocabulary of size {size}")]
    IdOutOfRange { id: u32, size: usize },
}

/// Toy vocabulary: the four markers plus `content_count` content tokens.
/// Content token `i` renders as the decimal string of `i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Vocab {
    content_count: usize,
}

impl Vocab {
    pub fn new(content_count: usize) -> Self {
        Self { content_count }
    }

    pub fn size(&self) -> usize {
        4 + self.content_count
    }

    pub fn content_count(&self) -> usize {
        self.content_count
    }

    /// Token id of the `i`-th content token.
    pub fn content_token(&self, i: usize) -> u32 {
        debug_assert!(i < self.content_count);
        4 + i as u32
    }

    pub fn is_marker(&self, id: u32) -> bool {
        id < 4
    }

    pub fn render_token(&self, id: u32) -> String {
        if id < 4 {
            MARKER_STRINGS[id as usize].to_string()
        } else {
            (id - 4).to_string()
        }
    }

    /// Space-joined rendering with markers as atomic substrings.
    pub fn render(&self, tokens: &[u32]) -> String {
        tokens
            .iter()
            .map(|&t| self.render_token(t))
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Inverse of [`Vocab::render`] for whitespace-separated token strings.
    pub fn parse(&self, text: &str) -> Result<Vec<u32>, VocabError> {
        text.split_whitespace()
            .map(|word| {
                if let Some(i) = MARKER_STRINGS.iter().position(|m| *m == word) {
                    return Ok(i as u32);
                }
                match word.parse::<usize>() {
                    Ok(i) if i < self.content_count => Ok(4 + i as u32),
                    _ => Err(VocabError::UnknownToken(word.to_string())),
                }
            })
            .collect()
    }
}

impl Default for Vocab {
    /// Four markers plus eight content tokens.
    fn default() -> Self {
        Self { content_count: 8 }
    }
}

/// A tokenized response together with its rendered string form.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkedResponse {
    tokens: Vec<u32>,
    rendered: String,
    vocab: Vocab,
}

impl MarkedResponse {
    pub fn from_tokens(vocab: Vocab, tokens: Vec<u32>) -> Result<Self, VocabError> {
        if let Some(&id) = tokens.iter().find(|&&t| t as usize >= vocab.size()) {
            return Err(VocabError::IdOutOfRange {
                id,
                size: vocab.size(),
            });
        }
        let rendered = vocab.render(&tokens);
        Ok(Self {
            tokens,
            rendered,
            vocab,
        })
    }

    pub fn parse(vocab: Vocab, text: &str) -> Result<Self, VocabError> {
        Self::from_tokens(vocab, vocab.parse(text)?)
    }

    pub fn tokens(&self) -> &[u32] {
        &self.tokens
    }

    pub fn rendered(&self) -> &str {
        &self.rendered
    }
}

/// True when the token sequence is exactly
/// `<think> T </think> <answer> A </answer>` with content-only (possibly
/// empty) spans T and A.
fn matches_full_template(tokens: &[u32]) -> bool {
    if tokens.len() < 4 {
        return false;
    }
    let mut counts = [0usize; 4];
    for &t in tokens {
        if t < 4 {
            counts[t as usize] += 1;
        }
    }
    if counts != [1, 1, 1, 1] {
        return false;
    }
    let pos = |id: u32| tokens.iter().position(|&t| t == id).unwrap();
    let think_close = pos(THINK_CLOSE);
    tokens[0] == THINK_OPEN
        && *tokens.last().unwrap() == ANSWER_CLOSE
        && pos(ANSWER_OPEN) == think_close + 1
}

/// Format tier of a response: 1 for the full template, 0.5 when it merely
/// begins with `<think>` and ends with `</answer>`, 0.25 when only one of
/// those holds, 0 otherwise. The tiers overlap, so they apply top-down.
pub fn format_reward(response: &MarkedResponse) -> f64 {
    let tokens = response.tokens();
    if matches_full_template(tokens) {
        return 1.0;
    }
    let begins = tokens.first() == Some(&THINK_OPEN);
    let ends = tokens.last() == Some(&ANSWER_CLOSE);
    match (begins, ends) {
        (true, true) => 0.5,
        (true, false) | (false, true) => 0.25,
        (false, false) => 0.0,
    }
}

/// 1 when the span between the first `<answer>` and the following
/// `</answer>` renders (whitespace-trimmed) to the trimmed ground truth;
/// 0 otherwise, including missing or misordered markers.
pub fn answer_reward(response: &MarkedResponse, ground_truth: &str) -> f64 {
    let tokens = response.tokens();
    let Some(open) = tokens.iter().position(|&t| t == ANSWER_OPEN) else {
        return 0.0;
    };
    let Some(close) = tokens[open + 1..]
        .iter()
        .position(|&t| t == ANSWER_CLOSE)
        .map(|i| open + 1 + i)
    else {
        return 0.0;
    };
    let span = response.vocab.render(&tokens[open + 1..close]);
    if span.trim() == ground_truth.trim() {
        1.0
    } else {
        0.0
    }
}

/// Sum of the answer and format components; range [0, 2].
pub fn total_reward(response: &MarkedResponse, ground_truth: &str) -> f64 {
    answer_reward(response, ground_truth) + format_reward(response)
}
