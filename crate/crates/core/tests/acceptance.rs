//! Acceptance suite: one test per pipeline guarantee, each printing a PASS
//! line with its runtime. Every tolerance is pinned here, not computed.

use std::collections::BTreeSet;
use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use cadenza_core::analysis::{autocorrelation, repetition_density, token_efficiency, AnalysisError, RepetitionParams};
use cadenza_core::eval::{
    distance_pdf, evaluate_sets, kld_oa, normal_pdf, DistanceGrid, DistancePdf, Piece,
    DEFAULT_SEGMENTS, GRID_POINTS,
};
use cadenza_core::mask::{final_block_causal, scale_mask, vanilla_causal};
use cadenza_core::midi::{detokenize, parse_midi, tokenize, MidiNote, TokenSequence};
use cadenza_core::model::{
    compute_gradients, forward, loss, nucleus_filter, sample_index, train_step, AdamState,
    ModelConfig, Parameters, TrainConfig,
};
use cadenza_core::segment::{
    baseline_sample_at, effective_sample_at, effective_samples_sequential, supervised_coverage,
    Access, SamplerConfig, SamplerMode, SegmentSample,
};

fn report(id: u32, what: &str, started: Instant, budget_secs: f64) {
    let elapsed = started.elapsed().as_secs_f64();
    assert!(elapsed < budget_secs, "criterion {id} took {elapsed:.2}s, budget {budget_secs}s");
    println!("acceptance {id:02} ({what}): PASS [{elapsed:.2}s]");
}

// ---------------------------------------------------------------- criterion 1

#[test]
fn criterion_01_mask_golden() {
    let t0 = Instant::now();
    // 5x5 causal reference: row i sees columns 1..=i
    let vc = vanilla_causal(5).unwrap();
    #[rustfmt::skip]
    let vc_expected: [[u8; 5]; 5] = [
        [1, 0, 0, 0, 0],
        [1, 1, 0, 0, 0],
        [1, 1, 1, 0, 0],
        [1, 1, 1, 1, 0],
        [1, 1, 1, 1, 1],
    ];
    for i in 0..5 {
        for j in 0..5 {
            assert_eq!(vc.is_visible(i, j), vc_expected[i][j] == 1, "vanilla ({i},{j})");
        }
    }
    // 5x10 final-block reference: row 1 visible through column 6, row 5 through 10
    let fb = final_block_causal(5, 10).unwrap();
    #[rustfmt::skip]
    let fb_expected: [[u8; 10]; 5] = [
        [1, 1, 1, 1, 1, 1, 0, 0, 0, 0],
        [1, 1, 1, 1, 1, 1, 1, 0, 0, 0],
        [1, 1, 1, 1, 1, 1, 1, 1, 0, 0],
        [1, 1, 1, 1, 1, 1, 1, 1, 1, 0],
        [1, 1, 1, 1, 1, 1, 1, 1, 1, 1],
    ];
    for i in 0..5 {
        for j in 0..10 {
            assert_eq!(fb.is_visible(i, j), fb_expected[i][j] == 1, "final-block ({i},{j})");
        }
    }
    // combination oracle: elementwise AND of the two reference matrices
    let sm = scale_mask(5, 10, 5).unwrap();
    let combined = fb.combine(&sm).unwrap();
    for i in 0..5 {
        for j in 0..10 {
            let expected = fb_expected[i][j] == 1 && j >= 5;
            assert_eq!(combined.is_visible(i, j), expected, "combined ({i},{j})");
        }
    }
    report(1, "mask golden tests", t0, 1.0);
}

// ---------------------------------------------------------------- criterion 2

fn synthetic_token_corpus(count: usize, seed: u64, min_len: usize, max_len: usize) -> Vec<TokenSequence> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let l = rng.gen_range(min_len..=max_len);
            TokenSequence::new(
                format!("synthetic-{i}"),
                (0..l).map(|_| rng.gen_range(1..390u16)).collect(),
            )
        })
        .collect()
}

#[test]
fn criterion_02_leakage_and_coverage() {
    let t0 = Instant::now();
    let corpus = synthetic_token_corpus(50, 21, 200, 2000);
    let effective_cfg = SamplerConfig {
        mode: SamplerMode::Effective,
        access: Access::Sequential,
        m: 64,
        n: 8,
        pad_index: 0,
    };
    let baseline_cfg = SamplerConfig { mode: SamplerMode::Baseline, ..effective_cfg };
    for seq in &corpus {
        let l = seq.len();
        // effective: both the sequential stream and exhaustive random
        // endpoints supervise every position >= 2
        let stream: Vec<SegmentSample> =
            effective_samples_sequential(seq, &effective_cfg).unwrap().collect();
        let covered = supervised_coverage(&stream);
        let every: BTreeSet<usize> = (2..=l).collect();
        assert_eq!(covered, every, "sequential stream missed positions in {}", seq.source_id);
        let enumerated: Vec<SegmentSample> = (effective_cfg.n..=l)
            .map(|e| effective_sample_at(seq, &effective_cfg, e).unwrap())
            .collect();
        assert_eq!(supervised_coverage(&enumerated), every, "random endpoints missed positions");

        // baseline: supervised union over every admissible window, compared
        // to a per-window enumeration oracle computed from the window rule
        let windows: Vec<SegmentSample> = (1..=(l - baseline_cfg.m + 1))
            .map(|s| baseline_sample_at(seq, &baseline_cfg, s).unwrap())
            .collect();
        let implementation = supervised_coverage(&windows);
        let mut oracle = BTreeSet::new();
        for s in 1..=(l - baseline_cfg.m + 1) {
            // window x_s..x_{s+m-1}: the final n slots predict the next token
            for p in (s + baseline_cfg.m - baseline_cfg.n + 1)..=(s + baseline_cfg.m) {
                if p >= 2 && p <= l {
                    oracle.insert(p);
                }
            }
        }
        assert_eq!(implementation, oracle, "baseline coverage mismatch in {}", seq.source_id);
        let never: Vec<usize> = (2..=l).filter(|p| !implementation.contains(p)).collect();
        assert!(!never.is_empty(), "baseline left no unsupervised prefix");
        assert_eq!(never, (2..=(baseline_cfg.m - baseline_cfg.n + 1)).collect::<Vec<_>>());
    }
    report(2, "leakage and coverage", t0, 10.0);
}

// ---------------------------------------------------------------- criterion 3

#[test]
fn criterion_03_token_efficiency_formula() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    // 1251 sequences, mirroring the reference corpus piece count
    let lengths: Vec<u64> = (0..1251).map(|_| rng.gen_range(50..40_000)).collect();
    let grid = [1024usize, 2048, 4096, 8192, 16384, 32768];
    for &n in &grid {
        for &m in &grid {
            let cell = token_efficiency(&lengths, n, m).unwrap();
            // oracle: brute-force per-sequence loop
            let mut expect = 0u64;
            for &l in &lengths {
                let usable = l.min(m as u64);
                expect += usable.saturating_sub(n as u64);
            }
            assert_eq!(cell.non_contributing, expect, "cell ({n},{m})");
            if m <= n {
                assert_eq!(cell.non_contributing, 0, "diagonal/upper cell ({n},{m})");
            }
        }
        // monotone in m
        let row: Vec<u64> =
            grid.iter().map(|&m| token_efficiency(&lengths, n, m).unwrap().non_contributing).collect();
        assert!(row.windows(2).all(|w| w[0] <= w[1]), "row n={n} not monotone: {row:?}");
    }
    for &m in &grid {
        let col: Vec<u64> =
            grid.iter().map(|&n| token_efficiency(&lengths, n, m).unwrap().non_contributing).collect();
        assert!(col.windows(2).all(|w| w[0] >= w[1]), "column m={m} not anti-monotone: {col:?}");
    }
    // the published reference cell, checked when a corpus manifest is supplied
    match std::env::var("MAESTRO_LENGTHS") {
        Ok(path) => {
            let text = std::fs::read_to_string(&path).expect("readable MAESTRO_LENGTHS file");
            let lens: Vec<u64> =
                text.split_whitespace().map(|t| t.parse().expect("integer length")).collect();
            let total: u64 = lens.iter().sum();
            assert_eq!(total, 25_864_128, "corpus total token count");
            let cell = token_efficiency(&lens, 1024, 32768).unwrap();
            assert_eq!(cell.non_contributing, 20_554_122);
            assert!((cell.rate - 0.7947).abs() < 5e-5, "rate {}", cell.rate);
        }
        Err(_) => println!("acceptance 03: reference corpus not supplied; formula checked on synthetic corpus"),
    }
    report(3, "token efficiency formula", t0, 5.0);
}

// ---------------------------------------------------------------- criterion 4

fn toy_config() -> ModelConfig {
    ModelConfig {
        vocab_size: 390,
        d_model: 32,
        n_heads: 4,
        d_head: 8,
        n_self_layers: 2,
        cross_windows: vec![None, Some(8)],
        m: 16,
        n: 4,
        dropout: 0.0,
        seed: 0,
    }
}

fn random_sample(cfg: &ModelConfig, rng: &mut ChaCha8Rng) -> SegmentSample {
    let pad = rng.gen_range(0..=(cfg.m - cfg.n));
    let mut inputs = vec![0u16; cfg.m];
    for slot in inputs.iter_mut().skip(pad) {
        *slot = rng.gen_range(1..cfg.vocab_size as u16);
    }
    SegmentSample {
        inputs,
        targets: (0..cfg.n).map(|_| rng.gen_range(1..cfg.vocab_size as u16)).collect(),
        target_positions: (1..=cfg.n).collect(),
        ignore: vec![false; cfg.n],
        pad_count: pad,
    }
}

#[test]
fn criterion_04_gradient_check() {
    let t0 = Instant::now();
    let cfg = toy_config();
    let mut params = Parameters::init(&cfg).unwrap();
    // the output projection initializes at zero; point every parameter group
    // somewhere generic before differentiating
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for v in params.output_projection.iter_mut() {
        *v = rng.gen_range(-0.05..0.05);
    }
    for s in params.head_scale.iter_mut() {
        *s += rng.gen_range(-0.2..0.2);
    }
    let batch: Vec<SegmentSample> = (0..2).map(|_| random_sample(&cfg, &mut rng)).collect();
    let (_, grads) = compute_gradients(&params, &cfg, &batch).unwrap();

    let batch_loss = |p: &Parameters| -> f64 {
        let total: usize = batch.iter().map(|s| s.supervised_count()).sum();
        let mut sum = 0.0;
        for sample in &batch {
            let cache = forward(p, &cfg, sample).unwrap();
            let l = loss(&cache.logits, &sample.targets, &sample.ignore, cfg.vocab_size).unwrap();
            sum += l * sample.supervised_count() as f64;
        }
        sum / total as f64
    };

    let eps = 1e-4;
    let tol = 1e-4;
    let grad_tensors: Vec<(String, Vec<f64>)> =
        grads.tensors().iter().map(|(n, t)| (n.clone(), t.to_vec())).collect();
    let mut checked = 0usize;
    let mut max_rel = 0.0f64;
    for (t_idx, (name, gt)) in grad_tensors.iter().enumerate() {
        let len = gt.len();
        // stratified: ~40 indices per tensor, always including both ends
        let stride = (len / 40).max(1);
        let mut indices: Vec<usize> = (0..len).step_by(stride).collect();
        indices.push(len - 1);
        indices.dedup();
        for &k in &indices {
            let mut plus = params.clone();
            plus.tensors_mut()[t_idx][k] += eps;
            let lp = batch_loss(&plus);
            let mut minus = params.clone();
            minus.tensors_mut()[t_idx][k] -= eps;
            let lm = batch_loss(&minus);
            let numeric = (lp - lm) / (2.0 * eps);
            let analytic = gt[k];
            let denom = analytic.abs().max(numeric.abs());
            if denom < 1e-10 {
                continue;
            }
            let rel = (analytic - numeric).abs() / denom;
            max_rel = max_rel.max(rel);
            assert!(
                rel < tol,
                "{name}[{k}]: analytic={analytic:.6e} numeric={numeric:.6e} rel={rel:.3e}"
            );
            checked += 1;
        }
    }
    assert!(checked > 500, "only {checked} gradient comparisons carried signal");
    println!("acceptance 04: checked {checked} parameters, max relative error {max_rel:.3e}");
    report(4, "end-to-end gradient check", t0, 60.0);
}

// ---------------------------------------------------------------- criterion 5

#[test]
fn criterion_05_masked_softmax_rows() {
    let t0 = Instant::now();
    let cfg = toy_config();
    let params = Parameters::init(&cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let mut rows_checked = 0usize;
    while rows_checked < 1000 {
        let sample = random_sample(&cfg, &mut rng);
        let cache = forward(&params, &cfg, &sample).unwrap();
        for block_idx in 0..cfg.cross_windows.len() {
            let probs = cache.cross_attention_probs(block_idx);
            let cols = cfg.m;
            for h in 0..cfg.n_heads {
                for i in 0..cfg.n {
                    let row = &probs[h * cfg.n * cols + i * cols..h * cfg.n * cols + (i + 1) * cols];
                    let mut visible_sum = 0.0;
                    let effective_pad = sample.pad_count.min(cfg.m - cfg.n);
                    for (j, &p) in row.iter().enumerate() {
                        let visible = visible_in_cross_mask(&cfg, block_idx, effective_pad, i, j);
                        if visible {
                            visible_sum += p;
                        } else {
                            assert_eq!(p, 0.0, "hidden cell ({i},{j}) weight {p}");
                        }
                    }
                    assert!(
                        (visible_sum - 1.0).abs() <= 1e-12,
                        "row sum {visible_sum} at block {block_idx} head {h} row {i}"
                    );
                    rows_checked += 1;
                }
            }
        }
    }
    report(5, "masked softmax correctness", t0, 10.0);
}

fn visible_in_cross_mask(cfg: &ModelConfig, block: usize, pad: usize, i: usize, j: usize) -> bool {
    let final_block = j + 1 <= cfg.m - cfg.n + i + 1;
    let padding = j >= pad;
    let window = match cfg.cross_windows[block] {
        Some(w) => j + 1 > cfg.m - w,
        None => true,
    };
    final_block && padding && window
}

// ---------------------------------------------------------------- criterion 6

#[test]
fn criterion_06_window_locality() {
    let t0 = Instant::now();
    let w = 8usize;
    let cfg = ModelConfig { cross_windows: vec![Some(w)], ..toy_config() };
    let params = {
        let mut p = Parameters::init(&cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(66);
        for v in p.output_projection.iter_mut() {
            *v = rng.gen_range(-0.05..0.05);
        }
        p
    };
    let mut rng = ChaCha8Rng::seed_from_u64(67);
    for trial in 0..100 {
        let mut sample = random_sample(&cfg, &mut rng);
        sample.pad_count = 0; // probe every early position
        for slot in sample.inputs.iter_mut() {
            if *slot == 0 {
                *slot = rng.gen_range(1..cfg.vocab_size as u16);
            }
        }
        let base = forward(&params, &cfg, &sample).unwrap();
        let position = rng.gen_range(0..cfg.m - w); // 0-based index <= m-w-1
        let mut perturbed = sample.clone();
        perturbed.inputs[position] = {
            let mut t = rng.gen_range(1..cfg.vocab_size as u16);
            while t == sample.inputs[position] {
                t = rng.gen_range(1..cfg.vocab_size as u16);
            }
            t
        };
        let changed = forward(&params, &cfg, &perturbed).unwrap();
        assert_eq!(
            base.cross_layer_output(0),
            changed.cross_layer_output(0),
            "trial {trial}: windowed layer output moved"
        );
        assert_eq!(base.logits, changed.logits, "trial {trial}: logits moved");
    }
    report(6, "scale-mask window locality", t0, 10.0);
}

// ---------------------------------------------------------------- criterion 7

/// Motif corpus: looped 4-note cells tokenized through the real tokenizer.
fn motif_token_corpus(count: usize, seed: u64) -> Vec<TokenSequence> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let root = rng.gen_range(48u8..72);
            let motif = [root, root + 4, root + 7, root + 4];
            let ioi = 0.2 + rng.gen_range(0.0..0.1);
            let mut notes = Vec::new();
            for k in 0..rng.gen_range(24..48) {
                let pitch = motif[k % motif.len()];
                let onset = k as f64 * ioi;
                notes.push(MidiNote::new(pitch, onset, onset + ioi * 0.8, 70).unwrap());
            }
            tokenize(&notes, format!("motif-{i}"))
        })
        .collect()
}

#[test]
fn criterion_07_toy_training_convergence() {
    let t0 = Instant::now();
    let cfg = toy_config();
    let train_cfg = TrainConfig { scale: 200.0, steps: 300, seed: 7, ..TrainConfig::default() };
    let corpus = motif_token_corpus(50, 77);
    let sampler_cfg = SamplerConfig {
        mode: SamplerMode::Effective,
        access: Access::Random,
        m: cfg.m,
        n: cfg.n,
        pad_index: 0,
    };

    let run = || -> Vec<f64> {
        let mut params = Parameters::init(&cfg).unwrap();
        let mut state = AdamState::new(&cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(train_cfg.seed);
        let mut losses = Vec::with_capacity(train_cfg.steps as usize);
        for _ in 0..train_cfg.steps {
            let batch: Vec<SegmentSample> = (0..4)
                .map(|_| {
                    let seq = &corpus[rng.gen_range(0..corpus.len())];
                    cadenza_core::segment::effective_sample_random(seq, &sampler_cfg, &mut rng).unwrap()
                })
                .collect();
            losses.push(train_step(&mut params, &cfg, &train_cfg, &mut state, &batch).unwrap());
        }
        losses
    };

    let losses = run();
    let step1 = losses[0];
    assert!(
        (step1 - (cfg.vocab_size as f64).ln()).abs() < 1e-6,
        "step-1 loss {step1} differs from ln(vocab)"
    );
    let reached = losses.iter().position(|&l| l < 0.5 * step1);
    assert!(
        reached.is_some(),
        "loss never fell below half of {step1}; final {}",
        losses.last().unwrap()
    );
    println!(
        "acceptance 07: loss halved at step {} (step1 {:.3}, final {:.3})",
        reached.unwrap() + 1,
        step1,
        losses.last().unwrap()
    );
    // bit-identical traces under the same seed
    let second = run();
    assert_eq!(losses, second, "training trace depends on more than the seed");
    report(7, "toy training convergence", t0, 300.0);
}

// ---------------------------------------------------------------- criterion 8

fn random_piece(rng: &mut ChaCha8Rng) -> Vec<MidiNote> {
    // non-overlapping per pitch, duration >= 20 ms so quantization stays
    // inside the half-step bound
    let count = rng.gen_range(5..60);
    let mut per_pitch_clock = [0.0f64; 128];
    let mut notes = Vec::with_capacity(count);
    for _ in 0..count {
        let pitch = rng.gen_range(21u8..108);
        let start = per_pitch_clock[pitch as usize] + rng.gen_range(0.03..0.8);
        let dur = rng.gen_range(0.02..1.8);
        per_pitch_clock[pitch as usize] = start + dur + 0.02;
        notes.push(MidiNote::new(pitch, start, start + dur, rng.gen_range(0..128)).unwrap());
    }
    cadenza_core::midi::sort_notes(&mut notes);
    notes
}

#[test]
fn criterion_08_tokenizer_round_trip() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(88);
    for piece in 0..200 {
        let notes = random_piece(&mut rng);
        let seq = tokenize(&notes, format!("rt-{piece}"));
        let back = detokenize(&seq).unwrap();
        assert_eq!(back.dangling_note_offs, 0, "piece {piece}");
        assert_eq!(back.notes.len(), notes.len(), "piece {piece}");
        // quantization may swap the (onset, pitch) order of near-simultaneous
        // notes; pair them by (pitch, onset) where per-pitch order is stable
        let by_pitch = |xs: &[MidiNote]| {
            let mut v = xs.to_vec();
            v.sort_by(|a, b| a.pitch.cmp(&b.pitch).then(a.onset.partial_cmp(&b.onset).unwrap()));
            v
        };
        let back_notes = by_pitch(&back.notes);
        let notes = by_pitch(&notes);
        for (a, b) in back_notes.iter().zip(&notes) {
            assert_eq!(a.pitch, b.pitch, "piece {piece}");
            assert!((a.onset - b.onset).abs() <= 0.005 + 1e-12, "piece {piece}: onset");
            assert!((a.offset - b.offset).abs() <= 0.005 + 1e-12, "piece {piece}: offset");
            assert_eq!(a.velocity / 4, b.velocity / 4, "piece {piece}: velocity bin");
        }
    }

    // pedal fixture against a hand-simulated oracle:
    //   pedal down 0.5s .. release 3.0s
    //   C4 1.0-1.3 (sustained), re-struck C4 at 2.0 truncates it
    //   E4 1.1-1.5 holds to the release
    let events: &[(f64, [u8; 3])] = &[
        (0.5, [0xb0, 64, 100]),
        (1.0, [0x90, 60, 70]),
        (1.1, [0x90, 64, 75]),
        (1.3, [0x80, 60, 0]),
        (1.5, [0x80, 64, 0]),
        (2.0, [0x90, 60, 85]),
        (2.4, [0x80, 60, 0]),
        (3.0, [0xb0, 64, 0]),
    ];
    let bytes = build_smf(events);
    let parsed = parse_midi(&bytes).unwrap();
    let got: Vec<(u8, f64, f64)> = parsed.notes.iter().map(|n| (n.pitch, n.onset, n.offset)).collect();
    let oracle = [(60u8, 1.0, 2.0), (64u8, 1.1, 3.0), (60u8, 2.0, 3.0)];
    assert_eq!(got.len(), oracle.len());
    for ((gp, go, gf), (ep, eo, ef)) in got.iter().zip(oracle.iter()) {
        assert_eq!(gp, ep);
        assert!((go - eo).abs() < 1e-9 && (gf - ef).abs() < 1e-9, "{go},{gf} vs {eo},{ef}");
    }
    report(8, "tokenizer round trip + pedal oracle", t0, 5.0);
}

/// Minimal format-0 SMF builder: division 1000 at the default tempo, so one
/// tick is half a millisecond.
fn build_smf(events: &[(f64, [u8; 3])]) -> Vec<u8> {
    fn push_vlq(out: &mut Vec<u8>, mut value: u32) {
        let mut stack = [0u8; 4];
        let mut i = 0;
        loop {
            stack[i] = (value & 0x7f) as u8;
            value >>= 7;
            i += 1;
            if value == 0 {
                break;
            }
        }
        while i > 1 {
            i -= 1;
            out.push(stack[i] | 0x80);
        }
        out.push(stack[0]);
    }
    let mut track = Vec::new();
    let mut clock = 0u32;
    for (time, payload) in events {
        let tick = (time * 2000.0).round() as u32;
        push_vlq(&mut track, tick - clock);
        clock = tick;
        track.extend_from_slice(payload);
    }
    push_vlq(&mut track, 0);
    track.extend_from_slice(&[0xff, 0x2f, 0x00]);
    let mut out = Vec::new();
    out.extend_from_slice(b"MThd");
    out.extend_from_slice(&6u32.to_be_bytes());
    out.extend_from_slice(&0u16.to_be_bytes());
    out.extend_from_slice(&1u16.to_be_bytes());
    out.extend_from_slice(&1000u16.to_be_bytes());
    out.extend_from_slice(b"MTrk");
    out.extend_from_slice(&(track.len() as u32).to_be_bytes());
    out.extend_from_slice(&track);
    out
}

// ---------------------------------------------------------------- criterion 9

#[test]
fn criterion_09_sampling_semantics() {
    let t0 = Instant::now();
    // analytic nucleus sets on hand-built distributions
    let dist = [0.9f64, 0.05, 0.03, 0.02];
    let logits: Vec<f64> = dist.iter().map(|p| p.ln()).collect();
    let kept = nucleus_filter(&logits, 1.0, 0.75);
    assert_eq!(kept.iter().map(|(i, _)| *i).collect::<Vec<_>>(), vec![0]);

    let dist = [0.4f64, 0.3, 0.2, 0.1];
    let logits: Vec<f64> = dist.iter().map(|p| p.ln()).collect();
    let kept = nucleus_filter(&logits, 1.0, 0.75);
    assert_eq!(kept.iter().map(|(i, _)| *i).collect::<Vec<_>>(), vec![0, 1, 2]);
    let mass: f64 = kept.iter().map(|(_, p)| p).sum();
    assert!((mass - 1.0).abs() < 1e-12);

    // a model whose distribution puts 0.9 on one token always emits it at 0.75
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let heavy: Vec<f64> = [0.9, 0.04, 0.03, 0.02, 0.01].iter().map(|p: &f64| p.ln()).collect();
    for _ in 0..200 {
        let kept = nucleus_filter(&heavy, 1.0, 0.75);
        assert_eq!(sample_index(&kept, &mut rng), 0);
    }

    // temperature -> 0+ equals argmax over random logits
    for trial in 0..100 {
        let logits: Vec<f64> = (0..390).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let argmax = logits
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        let kept = nucleus_filter(&logits, 1e-9, 0.75);
        assert_eq!(kept[0].0, argmax, "trial {trial}");
        assert_eq!(sample_index(&kept, &mut rng), argmax, "trial {trial}");
    }

    // top_p = 1, temperature = 1: the unmodified softmax
    let logits: Vec<f64> = (0..16).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let kept = nucleus_filter(&logits, 1.0, 1.0);
    assert_eq!(kept.len(), 16);
    let max = logits.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let z: f64 = logits.iter().map(|&l| (l - max).exp()).sum();
    for (idx, p) in &kept {
        assert!((p - (logits[*idx] - max).exp() / z).abs() < 1e-12);
    }
    report(9, "nucleus and temperature semantics", t0, 5.0);
}

// --------------------------------------------------------------- criterion 10

fn xorshift_unit(seed: u64) -> impl FnMut() -> f64 {
    let mut state = seed.wrapping_mul(0x9e3779b97f4a7c15) | 1;
    move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64
    }
}

/// Motif corpus with continuous jitter; every third piece is a dynamics-only
/// variant of the same base so intra-set distances genuinely reach zero.
fn structured_corpus(count: usize, seed: u64) -> Vec<Piece> {
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
                let wobble = (unit() * 3.0) as u8;
                let pitch = motif[i % motif.len()] + wobble;
                onset += base_ioi * (0.8 + 0.4 * unit());
                let dur = 0.15 + 0.12 * unit();
                let vel = 55 + (vel_unit() * 40.0) as u8;
                notes.push(MidiNote::new(pitch, onset, onset + dur, vel).unwrap());
            }
            Piece { id: format!("structured-{idx}"), notes }
        })
        .collect()
}

fn noise_corpus(count: usize, seed: u64) -> Vec<Piece> {
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
                notes.push(MidiNote::new(pitch, onset, onset + dur, vel).unwrap());
            }
            Piece { id: format!("noise-{idx}"), notes }
        })
        .collect()
}

#[test]
fn criterion_10_evaluation_pipeline() {
    let t0 = Instant::now();
    // closed-form oracle: overlap of two unit gaussians one apart is
    // 2Φ(-1/2) = 0.6170759
    let grid = DistanceGrid { upper: 16.0, points: GRID_POINTS };
    let make = |mean: f64| DistancePdf {
        grid: grid.clone(),
        density: (0..grid.points).map(|i| normal_pdf(grid.x(i), mean, 1.0)).collect(),
        bandwidth: 1.0,
        sample_count: 1,
    };
    let (_, oa) = kld_oa(&make(7.0), &make(8.0)).unwrap();
    assert!((oa - 0.6170759).abs() < 0.02, "gaussian overlap {oa}");

    // identical and disjoint densities bracket the scale
    let sample: Vec<f64> = (0..60).map(|i| 1.0 + i as f64 * 0.05).collect();
    let g2 = DistanceGrid::spanning(&sample, &[]).unwrap();
    let pdf = distance_pdf(&sample, &g2).unwrap();
    let (kld_same, oa_same) = kld_oa(&pdf, &pdf).unwrap();
    assert!((oa_same - 1.0).abs() < 1e-3 && kld_same.abs() < 1e-3);

    // self-comparison of a 30-piece corpus scores near-perfect everywhere
    let reference = structured_corpus(30, 7);
    let self_report = evaluate_sets(&reference, &reference, DEFAULT_SEGMENTS).unwrap();
    for f in &self_report.features {
        assert!(f.oa > 0.9, "{} self oa {}", f.kind.label(), f.oa);
        assert!(f.kld < 0.05, "{} self kld {}", f.kind.label(), f.kld);
    }

    // white noise scores strictly lower overlap on every feature
    let noise = noise_corpus(30, 3);
    let noise_report = evaluate_sets(&noise, &reference, DEFAULT_SEGMENTS).unwrap();
    for (s, n) in self_report.features.iter().zip(&noise_report.features) {
        assert!(
            n.oa < s.oa,
            "{}: noise oa {} not strictly below self oa {}",
            s.kind.label(),
            n.oa,
            s.oa
        );
    }
    report(10, "evaluation pipeline", t0, 60.0);
}

// --------------------------------------------------------------- criterion 11

#[test]
fn criterion_11_autocorrelation() {
    let t0 = Instant::now();
    let xs = [1.0, -1.0, 1.0, -1.0, 1.0, -1.0];
    let rho = autocorrelation(&xs, 1).unwrap();
    assert!((rho - (-5.0 / 6.0)).abs() <= 1e-12, "rho {rho}");
    match autocorrelation(&[3.5; 20], 1) {
        Err(AnalysisError::ConstantSequence) => {}
        other => panic!("constant sequence produced {other:?}"),
    }
    report(11, "token autocorrelation", t0, 1.0);
}

// --------------------------------------------------------------- criterion 12

#[test]
fn criterion_12_repetition_density() {
    let t0 = Instant::now();
    let params = RepetitionParams::default();
    // planted loop: C-E-G-E twelve times
    let motif = [60u8, 64, 67, 64];
    let mut looped = Vec::new();
    for k in 0..48 {
        let onset = k as f64 * 0.25;
        looped.push(MidiNote::new(motif[k % 4], onset, onset + 0.2, 80).unwrap());
    }
    // motif-free piece of the same length: a seeded random walk verified
    // pattern-free by direct scan
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut walk = Vec::new();
    let mut pitch = 60i32;
    for k in 0..48 {
        pitch += [-5, -3, -2, 2, 3, 5][rng.gen_range(0..6)];
        pitch = pitch.clamp(21, 108);
        let onset = k as f64 * 0.25;
        walk.push(MidiNote::new(pitch as u8, onset, onset + 0.2, 80).unwrap());
    }
    let pitches: Vec<u8> = walk.iter().map(|n| n.pitch).collect();
    for i in 0..pitches.len().saturating_sub(12) {
        let g = &pitches[i..i + 4];
        assert!(
            !(g == &pitches[i + 4..i + 8] && g == &pitches[i + 8..i + 12]),
            "random walk accidentally contains the planted pattern"
        );
    }

    let loop_density = repetition_density(&looped, &params).unwrap();
    let walk_density = repetition_density(&walk, &params).unwrap();
    let mut checked = 0usize;
    for (l, w) in loop_density.iter().zip(&walk_density) {
        if *l > 0.0 {
            assert!(*l >= 10.0 * (*w + 1e-12), "looped {l} vs walk {w}");
            checked += 1;
        }
    }
    assert!(checked >= 32, "only {checked} looped windows carried density");
    report(12, "repetition density separation", t0, 5.0);
}
