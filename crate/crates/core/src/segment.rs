//! Training-segment sampling.
//!
//! Two regimes over a token sequence of length l with input width m and
//! query length n:
//!
//! - baseline: a random m-token window starting at s ∈ [1, l−m+1]; only the
//!   final n slots are supervised, so the first positions of every sequence
//!   can never appear as targets when m > n.
//! - effective: a random segment *endpoint* e ∈ [n, l]; the window holds the
//!   up-to-m tokens preceding x_e, left-padded, so every position from 2 to l
//!   is eventually supervised. Short prefixes realize progressively larger
//!   context lengths.
//!
//! Targets follow the standard next-token shift: the query slot holding
//! absolute position p is supervised with x_{p+1}.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::midi::TokenSequence;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SampleError {
    #[error("empty sequence")]
    EmptySequence,
    #[error("sequence length {len} shorter than query length {n}")]
    TooShort { len: usize, n: usize },
    #[error("invalid sampler config: {0}")]
    BadConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerMode {
    Baseline,
    Effective,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Access {
    Random,
    Sequential,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub mode: SamplerMode,
    pub access: Access,
    /// Maximum input length in tokens.
    pub m: usize,
    /// Query length in tokens.
    pub n: usize,
    pub pad_index: u16,
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), SampleError> {
        if self.n == 0 || self.n > self.m {
            return Err(SampleError::BadConfig(format!(
                "need 1 <= n <= m, got n={} m={}",
                self.n, self.m
            )));
        }
        Ok(())
    }
}

/// One training example: m input slots (left-padded), n supervised targets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentSample {
    /// Exactly m token slots, the first `pad_count` of which are PAD.
    pub inputs: Vec<u16>,
    /// Exactly n target tokens; `targets[i]` is the source token at
    /// `target_positions[i]` when not ignored.
    pub targets: Vec<u16>,
    /// Absolute 1-based source positions each target supervises.
    pub target_positions: Vec<usize>,
    /// True where the target contributes no loss (PAD-aligned query slot or
    /// position beyond the end of the sequence).
    pub ignore: Vec<bool>,
    pub pad_count: usize,
}

impl SegmentSample {
    /// Positions this sample actually supervises.
    pub fn supervised_positions(&self) -> impl Iterator<Item = usize> + '_ {
        self.target_positions
            .iter()
            .zip(&self.ignore)
            .filter_map(|(&p, &ig)| if ig { None } else { Some(p) })
    }

    pub fn supervised_count(&self) -> usize {
        self.ignore.iter().filter(|&&ig| !ig).count()
    }
}

/// Build the sample whose final query slot is supervised with x_e.
///
/// Inputs are the up-to-m tokens ending at x_{e−1}, left-padded to m.
/// Requires e ≥ n so that every query slot has a defined arithmetic position.
fn endpoint_sample(seq: &TokenSequence, cfg: &SamplerConfig, e: usize) -> SegmentSample {
    let l = seq.len();
    debug_assert!(e >= cfg.n);
    let content = (e - 1).min(cfg.m);
    let pad_count = cfg.m - content;
    let mut inputs = vec![cfg.pad_index; cfg.m];
    for (slot, token) in inputs[pad_count..].iter_mut().zip(&seq.tokens[(e - 1 - content)..(e - 1)]) {
        *slot = *token;
    }
    let mut targets = Vec::with_capacity(cfg.n);
    let mut target_positions = Vec::with_capacity(cfg.n);
    let mut ignore = Vec::with_capacity(cfg.n);
    for i in 0..cfg.n {
        let q = e - cfg.n + i + 1; // position supervised by query slot i
        let in_range = q <= l;
        targets.push(if in_range { seq.tokens[q - 1] } else { cfg.pad_index });
        target_positions.push(q);
        // position 1 has no predecessor (its query slot is PAD); positions
        // beyond the sequence have no token
        ignore.push(q < 2 || !in_range);
    }
    SegmentSample { inputs, targets, target_positions, ignore, pad_count }
}

/// Baseline regime: uniform window start s ∈ [1, l−m+1] (whole sequence,
/// left-padded, when l < m).
pub fn baseline_sample<R: Rng>(
    seq: &TokenSequence,
    cfg: &SamplerConfig,
    rng: &mut R,
) -> Result<SegmentSample, SampleError> {
    cfg.validate()?;
    let l = seq.len();
    if l == 0 {
        return Err(SampleError::EmptySequence);
    }
    let s = if l >= cfg.m { rng.gen_range(1..=l - cfg.m + 1) } else { 1 };
    // the window x_s..x_{s+m-1} is the context preceding endpoint s+m; with
    // l < m the whole sequence plays that role
    let e = if l >= cfg.m { s + cfg.m } else { l + 1 };
    Ok(endpoint_sample(seq, cfg, e))
}

/// Baseline sample for an explicit window start s ∈ [1, l−m+1]; used by
/// exhaustive coverage enumeration.
pub fn baseline_sample_at(
    seq: &TokenSequence,
    cfg: &SamplerConfig,
    start: usize,
) -> Result<SegmentSample, SampleError> {
    cfg.validate()?;
    let l = seq.len();
    if l == 0 {
        return Err(SampleError::EmptySequence);
    }
    if l < cfg.m {
        if start != 1 {
            return Err(SampleError::BadConfig(format!("start {start} for short sequence")));
        }
        return Ok(endpoint_sample(seq, cfg, l + 1));
    }
    if start < 1 || start > l - cfg.m + 1 {
        return Err(SampleError::BadConfig(format!(
            "start {start} outside [1, {}]",
            l - cfg.m + 1
        )));
    }
    Ok(endpoint_sample(seq, cfg, start + cfg.m))
}

/// Effective regime, random access: uniform endpoint e ∈ [n, l].
pub fn effective_sample_random<R: Rng>(
    seq: &TokenSequence,
    cfg: &SamplerConfig,
    rng: &mut R,
) -> Result<SegmentSample, SampleError> {
    cfg.validate()?;
    let l = seq.len();
    if l < cfg.n {
        return Err(SampleError::TooShort { len: l, n: cfg.n });
    }
    // e = n with n = 1 would make an all-PAD window whose single target is
    // always ignored; start at 2 in that case (coverage is unaffected)
    let lo = cfg.n.max(2).min(l);
    let e = rng.gen_range(lo..=l);
    Ok(endpoint_sample(seq, cfg, e))
}

/// Build the sample for an explicit endpoint; used by the sequential stream
/// and by exhaustive coverage checks.
pub fn effective_sample_at(
    seq: &TokenSequence,
    cfg: &SamplerConfig,
    e: usize,
) -> Result<SegmentSample, SampleError> {
    cfg.validate()?;
    if e < cfg.n || e > seq.len() {
        return Err(SampleError::BadConfig(format!(
            "endpoint {e} outside [{}, {}]",
            cfg.n,
            seq.len()
        )));
    }
    Ok(endpoint_sample(seq, cfg, e))
}

/// Effective regime, sequential access: endpoints n, 2n, 3n, … while they fit,
/// plus a final shorter sample at e = l when l is not a multiple of n. The
/// supervised positions of consecutive samples tile the sequence; only the
/// tail sample may overlap its predecessor.
pub struct SequentialSampler<'a> {
    seq: &'a TokenSequence,
    cfg: SamplerConfig,
    next_k: usize,
    done: bool,
}

pub fn effective_samples_sequential<'a>(
    seq: &'a TokenSequence,
    cfg: &SamplerConfig,
) -> Result<SequentialSampler<'a>, SampleError> {
    cfg.validate()?;
    if seq.len() < cfg.n {
        return Err(SampleError::TooShort { len: seq.len(), n: cfg.n });
    }
    Ok(SequentialSampler { seq, cfg: *cfg, next_k: 1, done: false })
}

impl<'a> Iterator for SequentialSampler<'a> {
    type Item = SegmentSample;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let l = self.seq.len();
        let n = self.cfg.n;
        loop {
            let e = self.next_k * n;
            self.next_k += 1;
            if e > l {
                // tail: cover the remainder with a final shorter step
                self.done = true;
                if (self.next_k - 2) * n < l {
                    return Some(endpoint_sample(self.seq, &self.cfg, l));
                }
                return None;
            }
            if e < 2 {
                continue; // n = 1 degenerate first endpoint; nothing supervisable
            }
            if e == l {
                self.done = true;
            }
            return Some(endpoint_sample(self.seq, &self.cfg, e));
        }
    }
}

/// Union of supervised positions over a sample stream.
pub fn supervised_coverage<'a, I>(samples: I) -> BTreeSet<usize>
where
    I: IntoIterator<Item = &'a SegmentSample>,
{
    let mut set = BTreeSet::new();
    for sample in samples {
        set.extend(sample.supervised_positions());
    }
    set
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn seq(l: usize) -> TokenSequence {
        // token value at position p is p (mod 390) for easy position checks
        TokenSequence::new("t", (1..=l).map(|p| (p % 390) as u16).collect())
    }

    fn cfg(mode: SamplerMode, m: usize, n: usize) -> SamplerConfig {
        SamplerConfig { mode, access: Access::Random, m, n, pad_index: 0 }
    }

    fn token_at(s: &TokenSequence, pos: usize) -> u16 {
        s.tokens[pos - 1]
    }

    #[test]
    fn baseline_window_layout() {
        // l=10, m=5, n=2, forced s=3: inputs x3..x7, targets (x7, x8) at positions 7, 8
        let s = seq(10);
        let c = cfg(SamplerMode::Baseline, 5, 2);
        let sample = endpoint_sample(&s, &c, 3 + 5);
        let expect_inputs: Vec<u16> = (3..=7).map(|p| token_at(&s, p)).collect();
        assert_eq!(sample.inputs, expect_inputs);
        assert_eq!(sample.targets, vec![token_at(&s, 7), token_at(&s, 8)]);
        assert_eq!(sample.target_positions, vec![7, 8]);
        assert_eq!(sample.ignore, vec![false, false]);
        assert_eq!(sample.pad_count, 0);
    }

    #[test]
    fn baseline_short_sequence_padded_whole() {
        let s = seq(5);
        let c = cfg(SamplerMode::Baseline, 8, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let sample = baseline_sample(&s, &c, &mut rng).unwrap();
        assert_eq!(sample.pad_count, 3);
        assert_eq!(&sample.inputs[3..], &s.tokens[..]);
        // final slot holds x5; its target x6 does not exist
        assert_eq!(sample.ignore, vec![false, true]);
        assert_eq!(sample.target_positions, vec![5, 6]);
    }

    #[test]
    fn baseline_empty_sequence_is_error() {
        let s = seq(0);
        let c = cfg(SamplerMode::Baseline, 4, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(baseline_sample(&s, &c, &mut rng).unwrap_err(), SampleError::EmptySequence);
    }

    #[test]
    fn baseline_start_uniformity() {
        // oracle: chi-square over the 81 admissible starts, and all observed.
        // critical value for df=80 at p=0.001 (Wilson–Hilferty): 124.9
        let s = seq(100);
        let c = cfg(SamplerMode::Baseline, 20, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let draws = 10_000usize;
        let mut counts = vec![0usize; 82];
        for _ in 0..draws {
            let sample = baseline_sample(&s, &c, &mut rng).unwrap();
            // recover s from the first input token value (positions 1..=100 map to distinct values)
            let first = sample.inputs[0] as usize;
            assert!((1..=81).contains(&first), "start {first} outside [1,81]");
            counts[first] += 1;
        }
        let expected = draws as f64 / 81.0;
        let chi2: f64 = counts[1..].iter().map(|&c| {
            let d = c as f64 - expected;
            d * d / expected
        }).sum();
        assert!(chi2 < 124.9, "chi-square {chi2} too large for uniform starts");
        assert!(counts[1..].iter().all(|&c| c > 0), "some start never observed");
    }

    #[test]
    fn effective_minimal_prefix() {
        // l=8, m=4, n=2, e=2: inputs [PAD PAD PAD x1], targets (x1 ignored, x2)
        let s = seq(8);
        let c = cfg(SamplerMode::Effective, 4, 2);
        let sample = effective_sample_at(&s, &c, 2).unwrap();
        assert_eq!(sample.pad_count, 3);
        assert_eq!(sample.inputs, vec![0, 0, 0, token_at(&s, 1)]);
        assert_eq!(sample.targets, vec![token_at(&s, 1), token_at(&s, 2)]);
        assert_eq!(sample.target_positions, vec![1, 2]);
        assert_eq!(sample.ignore, vec![true, false]);
    }

    #[test]
    fn effective_full_window() {
        // l=8, m=4, n=2, e=8: inputs x4..x7, targets (x7, x8)
        let s = seq(8);
        let c = cfg(SamplerMode::Effective, 4, 2);
        let sample = effective_sample_at(&s, &c, 8).unwrap();
        assert_eq!(sample.pad_count, 0);
        let expect_inputs: Vec<u16> = (4..=7).map(|p| token_at(&s, p)).collect();
        assert_eq!(sample.inputs, expect_inputs);
        assert_eq!(sample.target_positions, vec![7, 8]);
        assert_eq!(sample.ignore, vec![false, false]);
    }

    #[test]
    fn effective_endpoint_coverage_is_total() {
        // oracle: exhaustive enumeration of endpoints on an l=50 fixture
        let s = seq(50);
        let c = cfg(SamplerMode::Effective, 8, 3);
        let samples: Vec<SegmentSample> =
            (c.n..=50).map(|e| effective_sample_at(&s, &c, e).unwrap()).collect();
        let covered = supervised_coverage(&samples);
        let expected: BTreeSet<usize> = (2..=50).collect();
        assert_eq!(covered, expected);
    }

    #[test]
    fn effective_too_short_is_error() {
        let s = seq(3);
        let c = cfg(SamplerMode::Effective, 8, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(
            effective_sample_random(&s, &c, &mut rng).unwrap_err(),
            SampleError::TooShort { len: 3, n: 4 }
        );
    }

    #[test]
    fn sequential_endpoints_tile_the_sequence() {
        // l=10, m=4, n=2: endpoints 2, 4, 6, 8, 10; first two are prefixes
        let s = seq(10);
        let c = SamplerConfig { mode: SamplerMode::Effective, access: Access::Sequential, m: 4, n: 2, pad_index: 0 };
        let samples: Vec<SegmentSample> = effective_samples_sequential(&s, &c).unwrap().collect();
        assert_eq!(samples.len(), 5);
        let ends: Vec<usize> = samples.iter().map(|s| *s.target_positions.last().unwrap()).collect();
        assert_eq!(ends, vec![2, 4, 6, 8, 10]);
        // prefix lengths 1 and 3 of content (e-1 tokens) then full windows
        assert_eq!(samples[0].pad_count, 3);
        assert_eq!(samples[1].pad_count, 1);
        assert!(samples[2..].iter().all(|s| s.pad_count == 0));
    }

    #[test]
    fn sequential_tail_sample_covers_remainder() {
        // l=3, m=4, n=2: two samples, ends 2 and 3
        let s = seq(3);
        let c = SamplerConfig { mode: SamplerMode::Effective, access: Access::Sequential, m: 4, n: 2, pad_index: 0 };
        let samples: Vec<SegmentSample> = effective_samples_sequential(&s, &c).unwrap().collect();
        assert_eq!(samples.len(), 2);
        let ends: Vec<usize> = samples.iter().map(|s| *s.target_positions.last().unwrap()).collect();
        assert_eq!(ends, vec![2, 3]);
    }

    #[test]
    fn sequential_union_matches_enumeration_oracle() {
        // oracle: enumeration on 20 random (l, m, n) triples
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let l = rng.gen_range(5..200);
            let m = rng.gen_range(2..64usize);
            let n = rng.gen_range(1..=m);
            if l < n {
                continue;
            }
            let s = seq(l);
            let c = SamplerConfig { mode: SamplerMode::Effective, access: Access::Sequential, m, n, pad_index: 0 };
            let samples: Vec<SegmentSample> = effective_samples_sequential(&s, &c).unwrap().collect();
            let covered = supervised_coverage(&samples);
            let expected: BTreeSet<usize> = (2..=l).collect();
            assert_eq!(covered, expected, "l={l} m={m} n={n}");
            // tiling: supervised counts sum to at most l-1 plus one window overlap
            let total: usize = samples.iter().map(|s| s.supervised_count()).sum();
            assert!(total >= l - 1 && total <= l - 1 + n, "l={l} m={m} n={n} total={total}");
        }
    }

    #[test]
    fn baseline_coverage_leaves_prefix_unsupervised() {
        // oracle: exhaustive window enumeration, l=100, m=50, n=10
        let s = seq(100);
        let c = cfg(SamplerMode::Baseline, 50, 10);
        let mut covered = BTreeSet::new();
        for start in 1..=(100 - 50 + 1) {
            let sample = baseline_sample_at(&s, &c, start).unwrap();
            covered.extend(sample.supervised_positions());
        }
        let expected: BTreeSet<usize> = (42..=100).collect();
        assert_eq!(covered, expected);
    }

    #[test]
    fn baseline_sample_at_validates_start() {
        let s = seq(10);
        let c = cfg(SamplerMode::Baseline, 5, 2);
        assert!(baseline_sample_at(&s, &c, 0).is_err());
        assert!(baseline_sample_at(&s, &c, 7).is_err());
        assert!(baseline_sample_at(&s, &c, 6).is_ok());
    }

    #[test]
    fn coverage_when_l_equals_n() {
        let s = seq(6);
        let c = cfg(SamplerMode::Effective, 8, 6);
        let sample = effective_sample_at(&s, &c, 6).unwrap();
        let covered: BTreeSet<usize> = sample.supervised_positions().collect();
        let expected: BTreeSet<usize> = (2..=6).collect();
        assert_eq!(covered, expected);
    }

    #[test]
    fn left_padding_never_changes_targets() {
        // same endpoint under different m: targets identical, only pads differ
        let s = seq(30);
        for e in 5..=30 {
            let narrow = endpoint_sample(&s, &cfg(SamplerMode::Effective, 6, 4), e);
            let wide = endpoint_sample(&s, &cfg(SamplerMode::Effective, 24, 4), e);
            assert_eq!(narrow.targets, wide.targets, "e={e}");
            assert_eq!(narrow.ignore, wide.ignore, "e={e}");
            assert_eq!(narrow.target_positions, wide.target_positions, "e={e}");
        }
    }

    #[test]
    fn samplers_deterministic_under_seed() {
        let s = seq(500);
        let c = cfg(SamplerMode::Effective, 32, 8);
        let run = |seed: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..50)
                .map(|_| effective_sample_random(&s, &c, &mut rng).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(run(42), run(42));
        assert_ne!(run(42), run(43));
    }

    #[test]
    fn config_validation() {
        assert!(cfg(SamplerMode::Baseline, 4, 5).validate().is_err());
        assert!(cfg(SamplerMode::Baseline, 4, 0).validate().is_err());
        assert!(cfg(SamplerMode::Baseline, 4, 4).validate().is_ok());
    }

    #[test]
    fn pad_count_stays_in_range() {
        let s = seq(40);
        for n in 1..=4usize {
            let c = cfg(SamplerMode::Effective, 8, n);
            for e in n.max(2)..=40 {
                let sample = effective_sample_at(&s, &c, e).unwrap();
                assert!(sample.pad_count <= c.m - 1, "n={n} e={e} pad={}", sample.pad_count);
            }
        }
    }
}
