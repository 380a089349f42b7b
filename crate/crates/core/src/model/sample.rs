//! Autoregressive decoding with temperature and nucleus (top-p) filtering.

use rand::Rng;

use crate::midi::{TokenSequence, PAD, TOKEN_END};

use super::forward::forward_inputs;
use super::params::{ModelConfig, Parameters};
use super::ModelError;

#[derive(Debug, Clone, PartialEq)]
pub struct SamplingConfig {
    /// Nucleus mass in (0, 1].
    pub top_p: f64,
    /// Softmax temperature, > 0.
    pub temperature: f64,
    pub max_tokens: usize,
    pub seed: u64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self { top_p: 0.75, temperature: 1.3, max_tokens: 8192, seed: 0 }
    }
}

impl SamplingConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(ModelError::BadInput(format!("top_p {} outside (0, 1]", self.top_p)));
        }
        if !(self.temperature > 0.0) {
            return Err(ModelError::BadInput(format!("temperature {} must be > 0", self.temperature)));
        }
        Ok(())
    }
}

/// Temperature-scaled softmax followed by the nucleus cut: keep the smallest
/// prefix of probability-sorted tokens whose cumulative mass reaches top_p,
/// renormalized. Returns (token index, probability) pairs, descending.
pub fn nucleus_filter(logits: &[f64], temperature: f64, top_p: f64) -> Vec<(usize, f64)> {
    let max = logits.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let mut probs: Vec<(usize, f64)> = logits
        .iter()
        .enumerate()
        .map(|(i, &l)| (i, ((l - max) / temperature).exp()))
        .collect();
    let z: f64 = probs.iter().map(|(_, p)| p).sum();
    for (_, p) in probs.iter_mut() {
        *p /= z;
    }
    probs.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    let mut cumulative = 0.0;
    let mut keep = probs.len();
    for (count, (_, p)) in probs.iter().enumerate() {
        cumulative += p;
        if cumulative >= top_p {
            keep = count + 1;
            break;
        }
    }
    probs.truncate(keep);
    let z: f64 = probs.iter().map(|(_, p)| p).sum();
    for (_, p) in probs.iter_mut() {
        *p /= z;
    }
    probs
}

/// Draw one index from a normalized (index, probability) list.
pub fn sample_index<R: Rng>(choices: &[(usize, f64)], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for &(idx, p) in choices {
        acc += p;
        if u < acc {
            return idx;
        }
    }
    choices.last().expect("nucleus set is never empty").0
}

/// Unconditional generation: starting from an all-PAD context, repeatedly
/// embed the last min(t, m) generated tokens left-padded to m, take the final
/// query slot's logits, filter, and sample; stops at TOKEN_END or max_tokens.
pub fn generate<R: Rng>(
    params: &Parameters,
    cfg: &ModelConfig,
    sampling: &SamplingConfig,
    rng: &mut R,
    source_id: impl Into<String>,
) -> Result<TokenSequence, ModelError> {
    cfg.validate()?;
    sampling.validate()?;
    let mut tokens: Vec<u16> = Vec::new();
    let v = cfg.vocab_size;
    while tokens.len() < sampling.max_tokens {
        let visible = tokens.len().min(cfg.m);
        let pad_count = cfg.m - visible;
        let mut inputs = vec![PAD; cfg.m];
        inputs[pad_count..].copy_from_slice(&tokens[tokens.len() - visible..]);
        let cache = forward_inputs::<R>(params, cfg, &inputs, pad_count, None)?;
        let last_row = &cache.logits[(cfg.n - 1) * v..cfg.n * v];
        let choices = nucleus_filter(last_row, sampling.temperature, sampling.top_p);
        let next = sample_index(&choices, rng) as u16;
        tokens.push(next);
        if next == TOKEN_END {
            break;
        }
    }
    Ok(TokenSequence::new(source_id, tokens))
}
