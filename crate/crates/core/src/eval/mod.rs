//! Distribution-based evaluation of a generated corpus against a reference
//! corpus.
//!
//! For every feature: extract per-piece values, form the intra-set
//! (reference leave-one-out) and inter-set (generated × reference) distance
//! samples, estimate both as PDFs on a shared grid, and score the pair with
//! overlap area and KL divergence.

mod features;
mod pdf;

pub use features::{
    extract_feature, FeatureKind, FeatureValue, DEFAULT_SEGMENTS, NOTE_LENGTH_BINS,
    NOTE_LENGTH_MAX_SECONDS, NOTE_LENGTH_MIN_SECONDS, PITCH_CLASSES,
};
pub use pdf::{distance_pdf, kld_oa, normal_pdf, DistanceGrid, DistancePdf, DENSITY_FLOOR, GRID_POINTS};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::midi::MidiNote;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("empty piece has no {0} value")]
    EmptyPiece(&'static str),
    #[error("feature dimensionality mismatch: {a} vs {b}")]
    DimMismatch { a: usize, b: usize },
    #[error("invalid distance sample: {0}")]
    BadDistances(String),
    #[error("pdfs evaluated on different grids")]
    GridMismatch,
    #[error("corpus too small: {0} pieces (need at least 2)")]
    CorpusTooSmall(usize),
}

/// A named piece; the unit of corpus evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub id: String,
    pub notes: Vec<MidiNote>,
}

/// Absolute difference for scalars, Euclidean distance on flattened values
/// otherwise.
pub fn feature_distance(a: &FeatureValue, b: &FeatureValue) -> Result<f64, EvalError> {
    if a.dim() != b.dim() {
        return Err(EvalError::DimMismatch { a: a.dim(), b: b.dim() });
    }
    let sq: f64 = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok(sq.sqrt())
}

/// All unordered pair distances within one set (leave-one-out: self-pairs
/// excluded).
pub fn intra_distances(set: &[FeatureValue]) -> Result<Vec<f64>, EvalError> {
    let mut out = Vec::with_capacity(set.len() * set.len().saturating_sub(1) / 2);
    for i in 0..set.len() {
        for j in (i + 1)..set.len() {
            out.push(feature_distance(&set[i], &set[j])?);
        }
    }
    Ok(out)
}

/// All cross-set pair distances.
pub fn inter_distances(a: &[FeatureValue], b: &[FeatureValue]) -> Result<Vec<f64>, EvalError> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for x in a {
        for y in b {
            out.push(feature_distance(x, y)?);
        }
    }
    Ok(out)
}

/// Scores and retained PDFs for one feature.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureReport {
    pub kind: FeatureKind,
    pub kld: f64,
    pub oa: f64,
    pub inter_count: usize,
    pub intra_count: usize,
    pub inter_pdf: DistancePdf,
    pub intra_pdf: DistancePdf,
}

/// Full evaluation output across the 13 features.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricReport {
    pub generated_pieces: usize,
    pub reference_pieces: usize,
    pub segments: usize,
    pub features: Vec<FeatureReport>,
    /// Methodology notes recorded alongside the numbers.
    pub metadata: Vec<String>,
}

impl MetricReport {
    pub fn feature(&self, kind: FeatureKind) -> Option<&FeatureReport> {
        self.features.iter().find(|f| f.kind == kind)
    }
}

/// Evaluate a generated corpus against a reference corpus.
///
/// The intra-set PDF comes from reference leave-one-out distances; the
/// inter-set PDF from generated × reference distances. KLD is directional,
/// inter relative to intra.
pub fn evaluate_sets(
    generated: &[Piece],
    reference: &[Piece],
    segments: usize,
) -> Result<MetricReport, EvalError> {
    if generated.len() < 2 {
        return Err(EvalError::CorpusTooSmall(generated.len()));
    }
    if reference.len() < 2 {
        return Err(EvalError::CorpusTooSmall(reference.len()));
    }
    let mut features = Vec::with_capacity(FeatureKind::ALL.len());
    for kind in FeatureKind::ALL {
        let gen_values: Vec<FeatureValue> = generated
            .iter()
            .map(|p| extract_feature(&p.notes, kind, segments))
            .collect::<Result<_, _>>()?;
        let ref_values: Vec<FeatureValue> = reference
            .iter()
            .map(|p| extract_feature(&p.notes, kind, segments))
            .collect::<Result<_, _>>()?;
        let intra = intra_distances(&ref_values)?;
        let inter = inter_distances(&gen_values, &ref_values)?;
        let grid = DistanceGrid::spanning(&inter, &intra)?;
        let inter_pdf = distance_pdf(&inter, &grid)?;
        let intra_pdf = distance_pdf(&intra, &grid)?;
        let (kld, oa) = kld_oa(&inter_pdf, &intra_pdf)?;
        features.push(FeatureReport {
            kind,
            kld,
            oa,
            inter_count: inter.len(),
            intra_count: intra.len(),
            inter_pdf,
            intra_pdf,
        });
    }
    Ok(MetricReport {
        generated_pieces: generated.len(),
        reference_pieces: reference.len(),
        segments,
        features,
        metadata: vec![
            "distance: absolute difference for scalars, euclidean on flattened vectors/matrices".into(),
            "pdf: gaussian kde, scott bandwidth, reflected at zero, renormalized on a 1000-point grid".into(),
            format!(
                "note-length bins: {NOTE_LENGTH_BINS} geometric bins from {NOTE_LENGTH_MIN_SECONDS}s to {NOTE_LENGTH_MAX_SECONDS}s"
            ),
            format!("segment features: {segments} equal-duration windows"),
        ],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn note(pitch: u8, onset: f64, dur: f64, velocity: u8) -> MidiNote {
        MidiNote::new(pitch, onset, onset + dur, velocity).unwrap()
    }

    fn xorshift_unit(seed: u64) -> impl FnMut() -> f64 {
        let mut state = seed.wrapping_mul(0x9e3779b97f4a7c15) | 1;
        move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        }
    }

    /// Structured corpus: motif-driven pieces with continuous deterministic
    /// jitter. Every third piece is a dynamics-only variant of the same base
    /// (velocities carry no feature weight), so each feature's intra-set
    /// distances genuinely reach zero — as they do in corpora containing
    /// repeated performances of one work.
    pub(crate) fn structured_corpus(count: usize, seed: u64) -> Vec<Piece> {
        (0..count)
            .map(|idx| {
                let base = idx / 3;
                let mut unit = xorshift_unit(seed ^ ((base as u64 + 1) << 8));
                let mut vel_unit = xorshift_unit(seed ^ ((idx as u64 + 1) << 32));
                let motif = [60u8, 64, 67, 64, 62, 65];
                let base_ioi = 0.2 + 0.1 * unit();
                let mut notes = Vec::new();
                let piece_notes = 60 + (unit() * 20.0) as usize;
                let mut onset = 0.0;
                for i in 0..piece_notes {
                    let wobble = (unit() * 3.0) as u8; // 0..=2
                    let pitch = motif[i % motif.len()] + wobble;
                    onset += base_ioi * (0.8 + 0.4 * unit());
                    let dur = 0.15 + 0.12 * unit();
                    let vel = 55 + (vel_unit() * 40.0) as u8;
                    notes.push(note(pitch, onset, dur, vel));
                }
                Piece { id: format!("structured-{idx}"), notes }
            })
            .collect()
    }

    /// White-noise corpus: uniform pitches, onsets, durations.
    pub(crate) fn noise_corpus(count: usize, seed: u64) -> Vec<Piece> {
        let mut unit = xorshift_unit(seed.wrapping_mul(0x2545f4914f6cdd1d).wrapping_add(99));
        (0..count)
            .map(|idx| {
                let piece_notes = 60 + (unit() * 20.0) as usize;
                let mut onset = 0.0f64;
                let mut notes = Vec::new();
                for _ in 0..piece_notes {
                    let pitch = 21 + (unit() * 88.0) as u8;
                    onset += 0.01 + 1.5 * unit();
                    let dur = 0.02 + 3.0 * unit();
                    let vel = 1 + (unit() * 126.0) as u8;
                    notes.push(note(pitch, onset, dur, vel));
                }
                Piece { id: format!("noise-{idx}"), notes }
            })
            .collect()
    }

    #[test]
    fn scalar_distance_is_absolute_difference() {
        let a = FeatureValue { kind: FeatureKind::TotalUsedPitch, values: vec![7.0] };
        let b = FeatureValue { kind: FeatureKind::TotalUsedPitch, values: vec![3.0] };
        assert_eq!(feature_distance(&a, &b).unwrap(), 4.0);
    }

    #[test]
    fn vector_distance_matches_hand_computation() {
        // oracle: 3x3 toy sets by hand
        let mk = |v: Vec<f64>| FeatureValue { kind: FeatureKind::PitchClassHistogram, values: v };
        let set_a = [mk(vec![1.0, 0.0, 0.0]), mk(vec![0.0, 1.0, 0.0]), mk(vec![0.0, 0.0, 1.0])];
        let set_b = [mk(vec![1.0, 0.0, 0.0]), mk(vec![0.5, 0.5, 0.0]), mk(vec![0.0, 0.5, 0.5])];
        let inter = inter_distances(&set_a, &set_b).unwrap();
        let r2 = std::f64::consts::SQRT_2;
        let expected = [
            0.0,
            (0.25f64 + 0.25).sqrt(),
            (1.0f64 + 0.25 + 0.25).sqrt(),
            r2,
            (0.25f64 + 0.25).sqrt(),
            (0.25f64 + 0.25).sqrt(),
            r2,
            (0.25f64 + 0.25 + 1.0).sqrt(),
            (0.25f64 + 0.25).sqrt(),
        ];
        assert_eq!(inter.len(), 9);
        for (g, e) in inter.iter().zip(expected.iter()) {
            assert!((g - e).abs() < 1e-12, "{g} vs {e}");
        }
        // intra excludes self-pairs: C(3,2) = 3 distances
        let intra = intra_distances(&set_a).unwrap();
        assert_eq!(intra.len(), 3);
        assert!(intra.iter().all(|&d| (d - r2).abs() < 1e-12));
    }

    #[test]
    fn identical_sets_include_zero_inter_distances() {
        let mk = |v: f64| FeatureValue { kind: FeatureKind::PitchRange, values: vec![v] };
        let set: Vec<FeatureValue> = (0..4).map(|i| mk(i as f64)).collect();
        let inter = inter_distances(&set, &set).unwrap();
        assert_eq!(inter.iter().filter(|&&d| d == 0.0).count(), 4);
    }

    #[test]
    fn singleton_intra_set_is_empty_and_fails_downstream() {
        let set = [FeatureValue { kind: FeatureKind::PitchRange, values: vec![1.0] }];
        let intra = intra_distances(&set).unwrap();
        assert!(intra.is_empty());
        let grid = DistanceGrid::spanning(&intra, &[1.0]).unwrap();
        assert!(distance_pdf(&intra, &grid).is_err());
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let a = FeatureValue { kind: FeatureKind::PitchClassHistogram, values: vec![0.5; 12] };
        let b = FeatureValue { kind: FeatureKind::PitchClassHistogram, values: vec![0.5; 11] };
        assert!(matches!(feature_distance(&a, &b), Err(EvalError::DimMismatch { .. })));
    }

    #[test]
    fn small_corpus_rejected() {
        let corpus = structured_corpus(5, 1);
        assert!(matches!(
            evaluate_sets(&corpus[..1], &corpus, DEFAULT_SEGMENTS),
            Err(EvalError::CorpusTooSmall(1))
        ));
        assert!(matches!(
            evaluate_sets(&corpus, &corpus[..0], DEFAULT_SEGMENTS),
            Err(EvalError::CorpusTooSmall(0))
        ));
    }

    #[test]
    fn self_comparison_scores_high_overlap() {
        let corpus = structured_corpus(30, 7);
        let report = evaluate_sets(&corpus, &corpus, DEFAULT_SEGMENTS).unwrap();
        assert_eq!(report.features.len(), 13);
        for f in &report.features {
            assert!(f.oa > 0.9, "{} oa={}", f.kind.label(), f.oa);
            assert!(f.kld < 0.05, "{} kld={}", f.kind.label(), f.kld);
            assert_eq!(f.intra_count, 30 * 29 / 2);
            assert_eq!(f.inter_count, 30 * 30);
        }
    }

    #[test]
    fn noise_scores_below_self_comparison_everywhere() {
        let reference = structured_corpus(30, 7);
        let noise = noise_corpus(30, 3);
        let self_report = evaluate_sets(&reference, &reference, DEFAULT_SEGMENTS).unwrap();
        let noise_report = evaluate_sets(&noise, &reference, DEFAULT_SEGMENTS).unwrap();
        for (s, n) in self_report.features.iter().zip(&noise_report.features) {
            assert!(
                n.oa < s.oa,
                "{}: noise oa {} not below self oa {}",
                s.kind.label(),
                n.oa,
                s.oa
            );
        }
    }
}
