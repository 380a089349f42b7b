//! Corpus and sequence diagnostics: tokens that can never contribute to the
//! training loss under a (query, max-input) configuration, lag-k token
//! autocorrelation, and per-window repetitive-note density.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::midi::MidiNote;

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("autocorrelation undefined for constant sequence")]
    ConstantSequence,
    #[error("lag {k} outside [1, {max}]")]
    BadLag { k: usize, max: usize },
    #[error("sequence too short: {0} values")]
    TooShort(usize),
    #[error("invalid input: {0}")]
    BadInput(String),
}

/// Non-contributing token count and rate for one (n, m) cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyCell {
    pub query_len: usize,
    pub max_input_len: usize,
    pub non_contributing: u64,
    /// non_contributing / total corpus tokens.
    pub rate: f64,
}

/// Per-sequence non-contributing tokens: max(0, min(m, l) − n).
///
/// Under the baseline window regime only the final n slots of a window are
/// supervised, so up to min(m, l) − n leading tokens of each sequence never
/// receive a training signal.
pub fn token_efficiency(lengths: &[u64], n: usize, m: usize) -> Result<EfficiencyCell, AnalysisError> {
    if lengths.iter().any(|&l| l == 0) {
        return Err(AnalysisError::BadInput("zero-length sequence".into()));
    }
    let total: u64 = lengths.iter().sum();
    if total == 0 {
        return Err(AnalysisError::BadInput("empty corpus".into()));
    }
    let non_contributing: u64 = lengths
        .iter()
        .map(|&l| l.min(m as u64).saturating_sub(n as u64))
        .sum();
    Ok(EfficiencyCell {
        query_len: n,
        max_input_len: m,
        non_contributing,
        rate: non_contributing as f64 / total as f64,
    })
}

/// Full efficiency matrix over a (query, max-input) grid.
pub fn token_efficiency_matrix(
    lengths: &[u64],
    query_lens: &[usize],
    max_input_lens: &[usize],
) -> Result<Vec<EfficiencyCell>, AnalysisError> {
    let mut cells = Vec::with_capacity(query_lens.len() * max_input_lens.len());
    for &n in query_lens {
        for &m in max_input_lens {
            cells.push(token_efficiency(lengths, n, m)?);
        }
    }
    Ok(cells)
}

/// Lag-k autocorrelation: ρ_k = Σ_{t=k+1..T} (x_t − x̄)(x_{t−k} − x̄) / Σ_t (x_t − x̄)².
pub fn autocorrelation(values: &[f64], k: usize) -> Result<f64, AnalysisError> {
    let t_len = values.len();
    if t_len < 2 {
        return Err(AnalysisError::TooShort(t_len));
    }
    if k == 0 || k > t_len - 1 {
        return Err(AnalysisError::BadLag { k, max: t_len - 1 });
    }
    let mean = values.iter().sum::<f64>() / t_len as f64;
    let denom: f64 = values.iter().map(|&x| (x - mean) * (x - mean)).sum();
    if denom == 0.0 {
        return Err(AnalysisError::ConstantSequence);
    }
    let num: f64 = (k..t_len).map(|t| (values[t] - mean) * (values[t - k] - mean)).sum();
    Ok(num / denom)
}

/// Per-window note counts over equal-duration windows; a numeric series for
/// autocorrelation over note activity rather than raw token indices.
pub fn note_count_series(notes: &[MidiNote], windows: usize) -> Vec<f64> {
    let mut counts = vec![0.0; windows];
    let duration = piece_duration(notes);
    if duration <= 0.0 || windows == 0 {
        return counts;
    }
    for note in notes {
        let idx = ((note.onset / duration) * windows as f64) as usize;
        counts[idx.min(windows - 1)] += 1.0;
    }
    counts
}

fn piece_duration(notes: &[MidiNote]) -> f64 {
    notes.iter().map(|n| n.offset).fold(0.0, f64::max)
}

/// Detection parameters for repetitive-note runs. A note is repetitive when
/// its pitch lies inside a maximal consecutive run where one pitch `gram` is
/// repeated back-to-back at least `min_repeats` times. This rule is a
/// heuristic stand-in; the thresholds are exposed so reports can state them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepetitionParams {
    pub segments: usize,
    pub gram: usize,
    pub min_repeats: usize,
}

impl Default for RepetitionParams {
    fn default() -> Self {
        Self { segments: 64, gram: 4, min_repeats: 3 }
    }
}

/// Indices (into the onset-sorted note list) of notes inside repeated-gram runs.
fn repetitive_note_indices(pitches: &[u8], gram: usize, min_repeats: usize) -> Vec<bool> {
    let n = pitches.len();
    let mut marked = vec![false; n];
    if gram == 0 || n < gram * min_repeats {
        return marked;
    }
    let mut i = 0;
    while i + gram * min_repeats <= n {
        let pattern = &pitches[i..i + gram];
        let mut repeats = 1;
        while i + (repeats + 1) * gram <= n
            && &pitches[i + repeats * gram..i + (repeats + 1) * gram] == pattern
        {
            repeats += 1;
        }
        if repeats >= min_repeats {
            for flag in &mut marked[i..i + repeats * gram] {
                *flag = true;
            }
            i += repeats * gram;
        } else {
            i += 1;
        }
    }
    marked
}

/// Repetitive-note density per window (notes per second), over `segments`
/// equal-duration windows of the piece.
pub fn repetition_density(notes: &[MidiNote], params: &RepetitionParams) -> Result<Vec<f64>, AnalysisError> {
    if params.segments == 0 {
        return Err(AnalysisError::BadInput("zero segments".into()));
    }
    let mut densities = vec![0.0; params.segments];
    if notes.is_empty() {
        return Ok(densities);
    }
    let duration = piece_duration(notes);
    if duration <= 0.0 {
        return Err(AnalysisError::BadInput("piece duration must be positive".into()));
    }
    let mut sorted: Vec<MidiNote> = notes.to_vec();
    crate::midi::sort_notes(&mut sorted);
    let pitches: Vec<u8> = sorted.iter().map(|n| n.pitch).collect();
    let marked = repetitive_note_indices(&pitches, params.gram, params.min_repeats);
    let window_duration = duration / params.segments as f64;
    for (note, &is_rep) in sorted.iter().zip(&marked) {
        if is_rep {
            let idx = ((note.onset / duration) * params.segments as f64) as usize;
            densities[idx.min(params.segments - 1)] += 1.0;
        }
    }
    for d in &mut densities {
        *d /= window_duration;
    }
    Ok(densities)
}
