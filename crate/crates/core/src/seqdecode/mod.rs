//! Beam-search decoding over an abstract per-step log-probability source.
//!
//! Hypotheses are ranked by `log_score / length^length_penalty`, where
//! `length` counts generated tokens (EOS included, BOS excluded). With the
//! default penalty of 1.0 this is the mean per-token log-probability. Ties
//! are broken by lexicographic token-id order so results are reproducible
//! everywhere.
//!
//! At every step the live beams are expanded over the whole vocabulary and
//! the best `num_beams` candidates are kept; candidates ending in EOS or
//! reaching `max_length` move to the finished pool and are never extended.
//! `max_length` counts generated tokens excluding BOS.

mod fixture;

use std::cmp::Ordering;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use fixture::{decode_fixture, decode_fixture_str, DecodedSample, LogitFixture, Vocabulary};

pub type TokenId = u32;

/// Allowed deviation of `Σ exp(log p)` from 1.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum DecodeError {
    #[error("invalid generation config: {0}")]
    Config(String),
    #[error("provider returned an empty vocabulary")]
    EmptyVocabulary,
    #[error("distribution for prefix {prefix:?} has {found} entries, expected {expected}")]
    VocabSize {
        prefix: Vec<TokenId>,
        expected: usize,
        found: usize,
    },
    #[error("distribution for prefix {prefix:?} is not normalized (sum of probabilities {sum})")]
    NotNormalized { prefix: Vec<TokenId>, sum: f64 },
    #[error("no distribution for prefix {prefix:?} in sample {sample}")]
    MissingPrefix { sample: String, prefix: Vec<TokenId> },
    #[error("special token id {0} is outside the vocabulary")]
    SpecialToken(TokenId),
    #[error("every continuation was masked; no hypothesis finished")]
    NoHypothesis,
    #[error("vocabulary line {line}: {reason}")]
    Vocab { line: usize, reason: String },
    #[error("fixture line {line}: {reason}")]
    Fixture { line: usize, reason: String },
    #[error("{0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationConfig {
    pub num_beams: usize,
    pub max_length: usize,
    pub length_penalty: f64,
    /// 0 disables n-gram blocking.
    pub no_repeat_ngram_size: usize,
    pub early_stopping: bool,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            num_beams: 3,
            max_length: 20,
            length_penalty: 1.0,
            no_repeat_ngram_size: 0,
            early_stopping: true,
        }
    }
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<(), DecodeError> {
        if self.num_beams < 1 {
            return Err(DecodeError::Config("num_beams must be at least 1".into()));
        }
        if self.max_length < 1 {
            return Err(DecodeError::Config("max_length must be at least 1".into()));
        }
        if !(self.length_penalty > 0.0 && self.length_penalty.is_finite()) {
            return Err(DecodeError::Config(format!(
                "length_penalty must be positive, got {}",
                self.length_penalty
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpecialTokens {
    pub bos: TokenId,
    pub eos: TokenId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    /// Starts with BOS.
    pub tokens: Vec<TokenId>,
    pub log_score: f64,
    pub finished: bool,
}

impl Hypothesis {
    pub fn generated_len(&self) -> usize {
        self.tokens.len().saturating_sub(1)
    }

    pub fn ranking_score(&self, length_penalty: f64) -> f64 {
        ranking_score(self.log_score, self.generated_len(), length_penalty)
    }

    /// Generated tokens with BOS and a trailing EOS removed.
    pub fn content(&self, eos: TokenId) -> &[TokenId] {
        let body = &self.tokens[1.min(self.tokens.len())..];
        match body.last() {
            Some(&t) if t == eos => &body[..body.len() - 1],
            _ => body,
        }
    }
}

pub fn ranking_score(log_score: f64, generated_len: usize, length_penalty: f64) -> f64 {
    if generated_len == 0 {
        return log_score;
    }
    log_score / (generated_len as f64).powf(length_penalty)
}

/// Log-probabilities over the vocabulary for the next token after `prefix`.
pub trait StepProvider {
    fn log_probs(&self, prefix: &[TokenId]) -> Result<Vec<f64>, DecodeError>;
}

impl<F> StepProvider for F
where
    F: Fn(&[TokenId]) -> Vec<f64>,
{
    fn log_probs(&self, prefix: &[TokenId]) -> Result<Vec<f64>, DecodeError> {
        Ok(self(prefix))
    }
}

/// Tokens that would complete an n-gram already present in `tokens`.
/// `n = 0` bans nothing.
pub fn ngram_mask(tokens: &[TokenId], n: usize) -> BTreeSet<TokenId> {
    let mut banned = BTreeSet::new();
    if n == 0 || tokens.len() < n {
        return banned;
    }
    let tail = &tokens[tokens.len() - (n - 1)..];
    for window in tokens.windows(n) {
        if &window[..n - 1] == tail {
            banned.insert(window[n - 1]);
        }
    }
    banned
}

fn check_distribution(prefix: &[TokenId], row: &[f64], expected: Option<usize>) -> Result<(), DecodeError> {
    if row.is_empty() {
        return Err(DecodeError::EmptyVocabulary);
    }
    if let Some(expected) = expected {
        if row.len() != expected {
            return Err(DecodeError::VocabSize {
                prefix: prefix.to_vec(),
                expected,
                found: row.len(),
            });
        }
    }
    let sum: f64 = row.iter().map(|v| v.exp()).sum();
    if row.iter().any(|v| v.is_nan() || *v > 0.0) || (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
        return Err(DecodeError::NotNormalized {
            prefix: prefix.to_vec(),
            sum,
        });
    }
    Ok(())
}

fn rank_order(a: &(f64, Hypothesis), b: &(f64, Hypothesis)) -> Ordering {
    b.0.total_cmp(&a.0).then_with(|| a.1.tokens.cmp(&b.1.tokens))
}

/// Runs beam search and returns up to `num_beams` finished hypotheses, best
/// first.
///
/// With `early_stopping`, the search halts once `num_beams` hypotheses have
/// finished and the worst of them scores strictly above every live beam's
/// current ranking score.
pub fn beam_search<P: StepProvider + ?Sized>(
    provider: &P,
    config: &GenerationConfig,
    special: SpecialTokens,
) -> Result<Vec<Hypothesis>, DecodeError> {
    config.validate()?;
    let lp = config.length_penalty;
    let mut vocab_size: Option<usize> = None;
    let mut live = vec![Hypothesis {
        tokens: vec![special.bos],
        log_score: 0.0,
        finished: false,
    }];
    let mut finished: Vec<(f64, Hypothesis)> = Vec::new();

    for step in 1..=config.max_length {
        let mut candidates: Vec<(f64, Hypothesis)> = Vec::new();
        for hyp in &live {
            let mut row = provider.log_probs(&hyp.tokens)?;
            check_distribution(&hyp.tokens, &row, vocab_size)?;
            if vocab_size.is_none() {
                vocab_size = Some(row.len());
                for id in [special.bos, special.eos] {
                    if id as usize >= row.len() {
                        return Err(DecodeError::SpecialToken(id));
                    }
                }
            }
            for banned in ngram_mask(&hyp.tokens, config.no_repeat_ngram_size) {
                if let Some(v) = row.get_mut(banned as usize) {
                    *v = f64::NEG_INFINITY;
                }
            }
            for (tok, &logp) in row.iter().enumerate() {
                if logp == f64::NEG_INFINITY {
                    continue;
                }
                let tok = tok as TokenId;
                let mut tokens = hyp.tokens.clone();
                tokens.push(tok);
                let next = Hypothesis {
                    tokens,
                    log_score: hyp.log_score + logp,
                    finished: tok == special.eos || step == config.max_length,
                };
                candidates.push((next.ranking_score(lp), next));
            }
        }
        candidates.sort_by(rank_order);
        candidates.truncate(config.num_beams);

        live.clear();
        for (score, hyp) in candidates {
            if hyp.finished {
                finished.push((score, hyp));
            } else {
                live.push(hyp);
            }
        }
        if live.is_empty() {
            break;
        }
        if config.early_stopping && finished.len() >= config.num_beams {
            finished.sort_by(rank_order);
            let worst_kept = finished[config.num_beams - 1].0;
            let best_live = live
                .iter()
                .map(|h| h.ranking_score(lp))
                .fold(f64::NEG_INFINITY, f64::max);
            if worst_kept > best_live {
                break;
            }
        }
    }

    if finished.is_empty() {
        return Err(DecodeError::NoHypothesis);
    }
    finished.sort_by(rank_order);
    finished.truncate(config.num_beams);
    Ok(finished.into_iter().map(|(_, h)| h).collect())
}
