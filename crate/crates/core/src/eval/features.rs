//! Per-piece feature extraction.
//!
//! Whole-piece features: distinct pitch classes (PC), distinct notes (NC),
//! pitch-class histogram (PCH), pitch-class transition matrix (PCTM), pitch
//! range (PR), mean absolute pitch interval (PI), mean inter-onset interval
//! (IOI), note-length histogram (NLH), and note-length transition matrix
//! (NLTM). Segment variants (PC/seg, NC/seg, PCH/seg, IOI/seg) compute the
//! same quantities inside 64 equal-duration windows and concatenate them so
//! every piece yields a fixed-length vector.

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::midi::MidiNote;

pub const PITCH_CLASSES: usize = 12;
/// Note-length bins: geometric from 25 ms to 6.4 s (ratio √2), under/overflow
/// clamped to the end bins. Performance data has no beat grid, so the scale
/// is logarithmic in wall time.
pub const NOTE_LENGTH_BINS: usize = 16;
pub const NOTE_LENGTH_MIN_SECONDS: f64 = 0.025;
pub const NOTE_LENGTH_MAX_SECONDS: f64 = 6.4;
/// Number of equal-duration windows for segment features.
pub const DEFAULT_SEGMENTS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeatureKind {
    TotalUsedPitch,
    TotalUsedNote,
    PitchClassHistogram,
    PitchClassTransitionMatrix,
    PitchRange,
    AveragePitchInterval,
    AverageInterOnsetInterval,
    NoteLengthHistogram,
    NoteLengthTransitionMatrix,
    SegmentUsedPitch,
    SegmentUsedNote,
    SegmentPitchClassHistogram,
    SegmentInterOnsetInterval,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 13] = [
        FeatureKind::TotalUsedPitch,
        FeatureKind::TotalUsedNote,
        FeatureKind::PitchClassHistogram,
        FeatureKind::PitchClassTransitionMatrix,
        FeatureKind::PitchRange,
        FeatureKind::AveragePitchInterval,
        FeatureKind::AverageInterOnsetInterval,
        FeatureKind::NoteLengthHistogram,
        FeatureKind::NoteLengthTransitionMatrix,
        FeatureKind::SegmentUsedPitch,
        FeatureKind::SegmentUsedNote,
        FeatureKind::SegmentPitchClassHistogram,
        FeatureKind::SegmentInterOnsetInterval,
    ];

    /// Short label used in reports and CSV headers.
    pub fn label(&self) -> &'static str {
        match self {
            FeatureKind::TotalUsedPitch => "PC",
            FeatureKind::TotalUsedNote => "NC",
            FeatureKind::PitchClassHistogram => "PCH",
            FeatureKind::PitchClassTransitionMatrix => "PCTM",
            FeatureKind::PitchRange => "PR",
            FeatureKind::AveragePitchInterval => "PI",
            FeatureKind::AverageInterOnsetInterval => "IOI",
            FeatureKind::NoteLengthHistogram => "NLH",
            FeatureKind::NoteLengthTransitionMatrix => "NLTM",
            FeatureKind::SegmentUsedPitch => "PC/seg",
            FeatureKind::SegmentUsedNote => "NC/seg",
            FeatureKind::SegmentPitchClassHistogram => "PCH/seg",
            FeatureKind::SegmentInterOnsetInterval => "IOI/seg",
        }
    }

    pub fn from_label(label: &str) -> Option<FeatureKind> {
        FeatureKind::ALL.iter().copied().find(|k| k.label() == label)
    }
}

/// A scalar or a flattened vector/matrix; distances treat everything as a
/// flat f64 slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureValue {
    pub kind: FeatureKind,
    pub values: Vec<f64>,
}

impl FeatureValue {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn scalar(&self) -> Option<f64> {
        (self.values.len() == 1).then(|| self.values[0])
    }
}

fn note_length_bin(duration: f64) -> usize {
    if duration <= NOTE_LENGTH_MIN_SECONDS {
        return 0;
    }
    if duration >= NOTE_LENGTH_MAX_SECONDS {
        return NOTE_LENGTH_BINS - 1;
    }
    let ratio = (NOTE_LENGTH_MAX_SECONDS / NOTE_LENGTH_MIN_SECONDS).ln() / NOTE_LENGTH_BINS as f64;
    let idx = ((duration / NOTE_LENGTH_MIN_SECONDS).ln() / ratio) as usize;
    idx.min(NOTE_LENGTH_BINS - 1)
}

fn normalize(mut hist: Vec<f64>) -> Vec<f64> {
    let sum: f64 = hist.iter().sum();
    if sum > 0.0 {
        for v in &mut hist {
            *v /= sum;
        }
    }
    hist
}

/// Row-normalize a flattened square matrix over rows with any mass.
fn row_stochastic(mut mat: Vec<f64>, dim: usize) -> Vec<f64> {
    for r in 0..dim {
        let row = &mut mat[r * dim..(r + 1) * dim];
        let sum: f64 = row.iter().sum();
        if sum > 0.0 {
            for v in row.iter_mut() {
                *v /= sum;
            }
        }
    }
    mat
}

fn onset_sorted(notes: &[MidiNote]) -> Vec<MidiNote> {
    let mut sorted = notes.to_vec();
    crate::midi::sort_notes(&mut sorted);
    sorted
}

fn piece_duration(notes: &[MidiNote]) -> f64 {
    notes.iter().map(|n| n.offset).fold(0.0, f64::max)
}

fn distinct_pitch_classes(notes: &[MidiNote]) -> f64 {
    let mut seen = [false; PITCH_CLASSES];
    for n in notes {
        seen[(n.pitch % 12) as usize] = true;
    }
    seen.iter().filter(|&&s| s).count() as f64
}

fn distinct_pitches(notes: &[MidiNote]) -> f64 {
    let mut seen = [false; 128];
    for n in notes {
        seen[n.pitch as usize] = true;
    }
    seen.iter().filter(|&&s| s).count() as f64
}

fn pitch_class_histogram(notes: &[MidiNote]) -> Vec<f64> {
    let mut hist = vec![0.0; PITCH_CLASSES];
    for n in notes {
        hist[(n.pitch % 12) as usize] += 1.0;
    }
    normalize(hist)
}

fn mean_ioi(notes: &[MidiNote]) -> f64 {
    if notes.len() < 2 {
        return 0.0;
    }
    let span = notes.last().unwrap().onset - notes[0].onset;
    span / (notes.len() - 1) as f64
}

/// Split onset-sorted notes into `segments` equal-duration windows by onset.
fn segment_slices(notes: &[MidiNote], segments: usize) -> Vec<Vec<MidiNote>> {
    let mut out = vec![Vec::new(); segments];
    let duration = piece_duration(notes);
    if duration <= 0.0 {
        return out;
    }
    for n in notes {
        let idx = ((n.onset / duration) * segments as f64) as usize;
        out[idx.min(segments - 1)].push(*n);
    }
    out
}

/// Extract one feature from a piece. Scalar kinds reject empty pieces;
/// histogram and segment kinds return zero vectors instead, keeping vector
/// lengths aligned across a corpus.
pub fn extract_feature(
    notes: &[MidiNote],
    kind: FeatureKind,
    segments: usize,
) -> Result<FeatureValue, EvalError> {
    use FeatureKind::*;
    let scalar_kind = matches!(
        kind,
        TotalUsedPitch | TotalUsedNote | PitchRange | AveragePitchInterval | AverageInterOnsetInterval
    );
    if notes.is_empty() && scalar_kind {
        return Err(EvalError::EmptyPiece(kind.label()));
    }
    let sorted = onset_sorted(notes);
    let values = match kind {
        TotalUsedPitch => vec![distinct_pitch_classes(&sorted)],
        TotalUsedNote => vec![distinct_pitches(&sorted)],
        PitchClassHistogram => pitch_class_histogram(&sorted),
        PitchClassTransitionMatrix => {
            let mut mat = vec![0.0; PITCH_CLASSES * PITCH_CLASSES];
            for pair in sorted.windows(2) {
                let a = (pair[0].pitch % 12) as usize;
                let b = (pair[1].pitch % 12) as usize;
                mat[a * PITCH_CLASSES + b] += 1.0;
            }
            row_stochastic(mat, PITCH_CLASSES)
        }
        PitchRange => {
            let max = sorted.iter().map(|n| n.pitch).max().unwrap();
            let min = sorted.iter().map(|n| n.pitch).min().unwrap();
            vec![(max - min) as f64]
        }
        AveragePitchInterval => {
            if sorted.len() < 2 {
                vec![0.0]
            } else {
                let sum: f64 = sorted
                    .windows(2)
                    .map(|p| (p[1].pitch as f64 - p[0].pitch as f64).abs())
                    .sum();
                vec![sum / (sorted.len() - 1) as f64]
            }
        }
        AverageInterOnsetInterval => vec![mean_ioi(&sorted)],
        NoteLengthHistogram => {
            let mut hist = vec![0.0; NOTE_LENGTH_BINS];
            for n in &sorted {
                hist[note_length_bin(n.duration())] += 1.0;
            }
            normalize(hist)
        }
        NoteLengthTransitionMatrix => {
            let mut mat = vec![0.0; NOTE_LENGTH_BINS * NOTE_LENGTH_BINS];
            for pair in sorted.windows(2) {
                let a = note_length_bin(pair[0].duration());
                let b = note_length_bin(pair[1].duration());
                mat[a * NOTE_LENGTH_BINS + b] += 1.0;
            }
            row_stochastic(mat, NOTE_LENGTH_BINS)
        }
        SegmentUsedPitch => segment_slices(&sorted, segments)
            .iter()
            .map(|s| distinct_pitch_classes(s))
            .collect(),
        SegmentUsedNote => segment_slices(&sorted, segments)
            .iter()
            .map(|s| distinct_pitches(s))
            .collect(),
        SegmentPitchClassHistogram => {
            let mut out = Vec::with_capacity(segments * PITCH_CLASSES);
            for slice in segment_slices(&sorted, segments) {
                out.extend(pitch_class_histogram(&slice));
            }
            out
        }
        SegmentInterOnsetInterval => segment_slices(&sorted, segments)
            .iter()
            .map(|s| mean_ioi(s))
            .collect(),
    };
    Ok(FeatureValue { kind, values })
}
