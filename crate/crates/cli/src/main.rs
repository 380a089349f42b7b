//! Command-line front end: every pipeline stage behind one binary.
//!
//! Exit codes: 0 success, 1 usage error, 2 data/runtime error.

mod config;
mod output;
mod pianoroll;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use cadenza_core::analysis::{
    autocorrelation, note_count_series, repetition_density, token_efficiency_matrix,
    RepetitionParams,
};
use cadenza_core::eval::{evaluate_sets, Piece};
use cadenza_core::mask::{final_block_causal, padding_mask, scale_mask, vanilla_causal};
use cadenza_core::midi::{
    detokenize, parse_midi, read_tokens_binary, read_tokens_jsonl, tokenize, write_midi,
    write_tokens_binary, write_tokens_jsonl, TokenSequence,
};
use cadenza_core::model::{
    count_params, generate, load_checkpoint, save_checkpoint, train_step, AdamState, Parameters,
};
use cadenza_core::segment::{
    baseline_sample, effective_sample_random, effective_samples_sequential, Access, SamplerConfig,
    SamplerMode, SegmentSample,
};

use config::RunConfig;
use output::write_atomic;

#[derive(Parser)]
#[command(name = "cadenza", version, about = "Symbolic music modeling pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a MIDI file and write its token sequence.
    Tokenize(TokenizeArgs),
    /// Decode a token sequence back into a MIDI file.
    Detokenize(DetokenizeArgs),
    /// Dump training segments drawn from a token corpus as JSON lines.
    SampleSegments(SampleSegmentsArgs),
    /// Print an attention mask as a 0/1 grid.
    MaskDump(MaskDumpArgs),
    /// Train a model on a token corpus.
    Train(TrainArgs),
    /// Generate a piece unconditionally from a trained (or fresh) model.
    Generate(GenerateArgs),
    /// Non-contributing-token matrix over a (query, max-input) grid.
    Efficiency(EfficiencyArgs),
    /// Lag-k autocorrelation of a token sequence or its note-count series.
    Autocorrelation(AutocorrelationArgs),
    /// Repetitive-note density per time window of a MIDI piece.
    Repetition(RepetitionArgs),
    /// Compare a generated corpus against a reference corpus.
    Evaluate(EvaluateArgs),
    /// Render a MIDI piece as an SVG piano roll.
    Pianoroll(PianorollArgs),
}

#[derive(Args)]
struct TokenizeArgs {
    /// Input .mid file.
    #[arg(long = "in")]
    input: PathBuf,
    /// Output token file (.jsonl or .bin by extension).
    #[arg(long)]
    out: PathBuf,
    /// Piece identifier stored in the token file (defaults to the file stem).
    #[arg(long)]
    id: Option<String>,
}

#[derive(Args)]
struct DetokenizeArgs {
    /// Input token file (.jsonl or .bin).
    #[arg(long = "in")]
    input: PathBuf,
    /// Record index within the token file.
    #[arg(long, default_value_t = 0)]
    index: usize,
    /// Output .mid file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SampleSegmentsArgs {
    /// Input token file.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_parser = parse_mode, default_value = "effective")]
    mode: SamplerMode,
    #[arg(long, value_parser = parse_access, default_value = "random")]
    access: Access,
    /// Maximum input length.
    #[arg(long)]
    m: usize,
    /// Query length.
    #[arg(long)]
    n: usize,
    /// Samples to draw per sequence (random access only).
    #[arg(long, default_value_t = 4)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output JSONL path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MaskDumpArgs {
    /// vanilla | final-block | scale | padding | combined
    #[arg(long)]
    kind: String,
    /// Query length (rows).
    #[arg(long)]
    rows: usize,
    /// Context length (columns); defaults to rows.
    #[arg(long)]
    cols: Option<usize>,
    /// Window length for scale/combined masks.
    #[arg(long)]
    window: Option<usize>,
    /// Hidden leading columns for padding/combined masks.
    #[arg(long, default_value_t = 0)]
    pad: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    /// Run configuration file (flat key = value).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Token corpus (.jsonl or .bin); overrides data.tokens.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Training steps; overrides train.steps.
    #[arg(long)]
    steps: Option<u64>,
    /// Seed; overrides train.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Checkpoint output path.
    #[arg(long)]
    out: PathBuf,
    /// Per-step loss CSV (step,loss,lr).
    #[arg(long)]
    loss_csv: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Start from a trained checkpoint instead of fresh parameters.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    max_tokens: Option<usize>,
    #[arg(long)]
    top_p: Option<f64>,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output .mid path.
    #[arg(long)]
    out: PathBuf,
    /// Also write the raw token sequence.
    #[arg(long)]
    tokens_out: Option<PathBuf>,
}

#[derive(Args)]
struct EfficiencyArgs {
    /// Corpus lengths: token file (.jsonl/.bin) or plain text, one integer
    /// per line.
    #[arg(long)]
    lengths: PathBuf,
    /// Query lengths (comma separated).
    #[arg(long)]
    query: String,
    /// Max input lengths (comma separated).
    #[arg(long)]
    max: String,
    /// CSV output; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AutocorrelationArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    lag: usize,
    /// tokens: raw vocabulary indices; note-counts: per-window note counts.
    #[arg(long, default_value = "tokens")]
    series: String,
    /// Window count for the note-count series.
    #[arg(long, default_value_t = 64)]
    windows: usize,
}

#[derive(Args)]
struct RepetitionArgs {
    /// Input .mid file.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 64)]
    segments: usize,
    #[arg(long, default_value_t = 4)]
    gram: usize,
    #[arg(long, default_value_t = 3)]
    min_repeats: usize,
    /// CSV output; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Directory of generated pieces (.mid, .jsonl, or .bin).
    #[arg(long)]
    generated: PathBuf,
    /// Directory of reference pieces.
    #[arg(long)]
    reference: PathBuf,
    /// Report JSON output.
    #[arg(long)]
    out: PathBuf,
    /// Optional directory for per-feature PDF grids as CSV.
    #[arg(long)]
    pdf_csv: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct PianorollArgs {
    /// Input .mid file.
    #[arg(long = "in")]
    input: PathBuf,
    /// Output .svg file.
    #[arg(long)]
    out: PathBuf,
}

fn parse_mode(s: &str) -> Result<SamplerMode, String> {
    match s {
        "baseline" => Ok(SamplerMode::Baseline),
        "effective" => Ok(SamplerMode::Effective),
        other => Err(format!("unknown mode `{other}` (baseline|effective)")),
    }
}

fn parse_access(s: &str) -> Result<Access, String> {
    match s {
        "random" => Ok(Access::Random),
        "sequential" => Ok(Access::Sequential),
        other => Err(format!("unknown access `{other}` (random|sequential)")),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // help/version are successful exits
            if err.use_stderr() {
                eprintln!("{err}");
                return ExitCode::from(1);
            }
            print!("{err}");
            return ExitCode::SUCCESS;
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Tokenize(args) => cmd_tokenize(args),
        Command::Detokenize(args) => cmd_detokenize(args),
        Command::SampleSegments(args) => cmd_sample_segments(args),
        Command::MaskDump(args) => cmd_mask_dump(args),
        Command::Train(args) => cmd_train(args),
        Command::Generate(args) => cmd_generate(args),
        Command::Efficiency(args) => cmd_efficiency(args),
        Command::Autocorrelation(args) => cmd_autocorrelation(args),
        Command::Repetition(args) => cmd_repetition(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Pianoroll(args) => cmd_pianoroll(args),
    }
}

fn load_config(path: &Option<PathBuf>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

fn read_token_file(path: &Path) -> Result<Vec<TokenSequence>> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let is_binary = path.extension().map(|e| e == "bin").unwrap_or(false);
    let seqs = if is_binary {
        read_tokens_binary(bytes.as_slice())?
    } else {
        read_tokens_jsonl(std::io::BufReader::new(bytes.as_slice()))?
    };
    if seqs.is_empty() {
        bail!("{} holds no token sequences", path.display());
    }
    Ok(seqs)
}

fn write_token_file(path: &Path, seqs: &[TokenSequence]) -> Result<PathBuf> {
    let mut buf = Vec::new();
    if path.extension().map(|e| e == "bin").unwrap_or(false) {
        write_tokens_binary(&mut buf, seqs)?;
    } else {
        write_tokens_jsonl(&mut buf, seqs)?;
    }
    write_atomic(path, &buf)
}

fn cmd_tokenize(args: TokenizeArgs) -> Result<()> {
    let bytes = std::fs::read(&args.input).with_context(|| format!("reading {}", args.input.display()))?;
    let parsed = parse_midi(&bytes)?;
    if parsed.dangling_note_offs > 0 {
        eprintln!("warning: {} dangling note-off events ignored", parsed.dangling_note_offs);
    }
    let id = args
        .id
        .unwrap_or_else(|| args.input.file_stem().unwrap_or_default().to_string_lossy().into_owned());
    let seq = tokenize(&parsed.notes, id);
    let written = write_token_file(&args.out, std::slice::from_ref(&seq))?;
    println!("{} notes -> {} tokens -> {}", parsed.notes.len(), seq.len(), written.display());
    Ok(())
}

fn cmd_detokenize(args: DetokenizeArgs) -> Result<()> {
    let seqs = read_token_file(&args.input)?;
    let seq = seqs
        .get(args.index)
        .ok_or_else(|| anyhow!("record {} out of range ({} records)", args.index, seqs.len()))?;
    let decoded = detokenize(seq)?;
    if decoded.dangling_note_offs > 0 {
        eprintln!("warning: {} dangling note-off tokens skipped", decoded.dangling_note_offs);
    }
    let bytes = write_midi(&decoded.notes)?;
    let written = write_atomic(&args.out, &bytes)?;
    println!("{} tokens -> {} notes -> {}", seq.len(), decoded.notes.len(), written.display());
    Ok(())
}

fn cmd_sample_segments(args: SampleSegmentsArgs) -> Result<()> {
    let seqs = read_token_file(&args.input)?;
    let cfg = SamplerConfig {
        mode: args.mode,
        access: args.access,
        m: args.m,
        n: args.n,
        pad_index: cadenza_core::midi::PAD,
    };
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut lines = String::new();
    let mut emit = |seq_id: &str, sample: &SegmentSample| -> Result<()> {
        let mut value = serde_json::to_value(sample)?;
        value["source_id"] = serde_json::Value::String(seq_id.to_string());
        lines.push_str(&serde_json::to_string(&value)?);
        lines.push('\n');
        Ok(())
    };
    for seq in &seqs {
        if seq.len() < cfg.n {
            eprintln!("warning: {} shorter than the query length, skipped", seq.source_id);
            continue;
        }
        match (args.mode, args.access) {
            (SamplerMode::Effective, Access::Sequential) => {
                for sample in effective_samples_sequential(seq, &cfg)? {
                    emit(&seq.source_id, &sample)?;
                }
            }
            (SamplerMode::Effective, Access::Random) => {
                for _ in 0..args.count {
                    emit(&seq.source_id, &effective_sample_random(seq, &cfg, &mut rng)?)?;
                }
            }
            (SamplerMode::Baseline, _) => {
                for _ in 0..args.count {
                    emit(&seq.source_id, &baseline_sample(seq, &cfg, &mut rng)?)?;
                }
            }
        }
    }
    match &args.out {
        Some(path) => {
            let written = write_atomic(path, lines.as_bytes())?;
            println!("segments -> {}", written.display());
        }
        None => print!("{lines}"),
    }
    Ok(())
}

fn cmd_mask_dump(args: MaskDumpArgs) -> Result<()> {
    let rows = args.rows;
    let cols = args.cols.unwrap_or(rows);
    let mask = match args.kind.as_str() {
        "vanilla" => vanilla_causal(rows)?,
        "final-block" => final_block_causal(rows, cols)?,
        "scale" => {
            let w = args.window.ok_or_else(|| anyhow!("--window required for scale masks"))?;
            scale_mask(rows, cols, w)?
        }
        "padding" => padding_mask(args.pad, rows, cols)?,
        "combined" => {
            let mut mask = final_block_causal(rows, cols)?;
            if args.pad > 0 {
                mask = mask.combine(&padding_mask(args.pad, rows, cols)?)?;
            }
            if let Some(w) = args.window {
                mask = mask.combine(&scale_mask(rows, cols, w)?)?;
            }
            mask
        }
        other => bail!("unknown mask kind `{other}` (vanilla|final-block|scale|padding|combined)"),
    };
    let grid = mask.to_grid_string();
    match &args.out {
        Some(path) => {
            write_atomic(path, grid.as_bytes())?;
        }
        None => print!("{grid}"),
    }
    Ok(())
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let run_cfg = load_config(&args.config)?;
    let model_cfg = run_cfg.model()?;
    let mut train_cfg = run_cfg.train()?;
    if let Some(steps) = args.steps {
        train_cfg.steps = steps;
    }
    if let Some(seed) = args.seed {
        train_cfg.seed = seed;
    }
    let data_path = args
        .data
        .clone()
        .or_else(|| run_cfg.get("data.tokens").map(PathBuf::from))
        .ok_or_else(|| anyhow!("no token corpus: pass --data or set data.tokens"))?;
    let corpus = read_token_file(&data_path)?;
    let mode = match run_cfg.get("data.mode") {
        Some("baseline") => SamplerMode::Baseline,
        Some("effective") | None => SamplerMode::Effective,
        Some(other) => bail!("unknown data.mode `{other}`"),
    };
    let sampler_cfg = SamplerConfig {
        mode,
        access: Access::Random,
        m: model_cfg.m,
        n: model_cfg.n,
        pad_index: cadenza_core::midi::PAD,
    };
    let usable: Vec<&TokenSequence> = corpus.iter().filter(|s| s.len() >= model_cfg.n).collect();
    let skipped = corpus.len() - usable.len();
    if skipped > 0 {
        eprintln!("warning: {skipped} sequences shorter than the query length skipped");
    }
    if usable.is_empty() {
        bail!("no usable sequences in {}", data_path.display());
    }
    let batch_size = run_cfg.batch_size()?;

    let mut params = Parameters::init(&model_cfg)?;
    let mut state = AdamState::new(&model_cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(train_cfg.seed);
    let mut csv = String::from("step,loss,lr\n");
    println!(
        "training: {} params, {} sequences, {} steps",
        count_params(&model_cfg)?,
        usable.len(),
        train_cfg.steps
    );
    for step in 1..=train_cfg.steps {
        let batch: Vec<SegmentSample> = (0..batch_size)
            .map(|_| {
                let seq = usable[rng.gen_range(0..usable.len())];
                match mode {
                    SamplerMode::Effective => effective_sample_random(seq, &sampler_cfg, &mut rng),
                    SamplerMode::Baseline => baseline_sample(seq, &sampler_cfg, &mut rng),
                }
            })
            .collect::<Result<_, _>>()?;
        let loss = train_step(&mut params, &model_cfg, &train_cfg, &mut state, &batch)?;
        let lr = cadenza_core::model::noam_rate(
            model_cfg.d_model,
            train_cfg.scale,
            train_cfg.warmup_steps,
            step,
        );
        csv.push_str(&format!("{step},{loss},{lr}\n"));
        if step == 1 || step % 50 == 0 || step == train_cfg.steps {
            println!("step {step:>6}  loss {loss:.4}  lr {lr:.6}");
        }
    }
    let mut ckpt = Vec::new();
    save_checkpoint(&mut ckpt, &model_cfg, &params)?;
    let written = write_atomic(&args.out, &ckpt)?;
    println!("checkpoint -> {}", written.display());
    if let Some(path) = &args.loss_csv {
        let written = write_atomic(path, csv.as_bytes())?;
        println!("loss curve -> {}", written.display());
    }
    Ok(())
}

fn cmd_generate(args: GenerateArgs) -> Result<()> {
    let run_cfg = load_config(&args.config)?;
    let (model_cfg, params) = match &args.checkpoint {
        Some(path) => {
            let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
            load_checkpoint(&mut bytes.as_slice())?
        }
        None => {
            let cfg = run_cfg.model()?;
            let params = Parameters::init(&cfg)?;
            (cfg, params)
        }
    };
    let mut sampling = run_cfg.sampling()?;
    if let Some(v) = args.max_tokens {
        sampling.max_tokens = v;
    }
    if let Some(v) = args.top_p {
        sampling.top_p = v;
    }
    if let Some(v) = args.temperature {
        sampling.temperature = v;
    }
    if let Some(v) = args.seed {
        sampling.seed = v;
    }
    sampling.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(sampling.seed);
    let id = args
        .out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "generated".to_string());
    let seq = generate(&params, &model_cfg, &sampling, &mut rng, id)?;
    let decoded = detokenize(&seq)?;
    let bytes = write_midi(&decoded.notes)?;
    let written = write_atomic(&args.out, &bytes)?;
    println!("{} tokens, {} notes -> {}", seq.len(), decoded.notes.len(), written.display());
    if let Some(path) = &args.tokens_out {
        let written = write_token_file(path, std::slice::from_ref(&seq))?;
        println!("tokens -> {}", written.display());
    }
    Ok(())
}

fn parse_grid_list(raw: &str, what: &str) -> Result<Vec<usize>> {
    raw.split(',')
        .map(|item| {
            item.trim()
                .parse::<usize>()
                .map_err(|e| anyhow!("{what} value `{}`: {e}", item.trim()))
        })
        .collect()
}

fn read_lengths(path: &Path) -> Result<Vec<u64>> {
    let ext = path.extension().map(|e| e.to_string_lossy().into_owned()).unwrap_or_default();
    if ext == "jsonl" || ext == "bin" {
        return Ok(read_token_file(path)?.iter().map(|s| s.len() as u64).collect());
    }
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.split_whitespace()
        .map(|t| t.parse::<u64>().map_err(|e| anyhow!("length `{t}`: {e}")))
        .collect()
}

fn cmd_efficiency(args: EfficiencyArgs) -> Result<()> {
    let lengths = read_lengths(&args.lengths)?;
    let total: u64 = lengths.iter().sum();
    let query = parse_grid_list(&args.query, "--query")?;
    let max = parse_grid_list(&args.max, "--max")?;
    let cells = token_efficiency_matrix(&lengths, &query, &max)?;
    let mut csv = String::from("query_len");
    for m in &max {
        csv.push_str(&format!(",m={m}"));
    }
    csv.push('\n');
    for (row, n) in query.iter().enumerate() {
        csv.push_str(&n.to_string());
        for col in 0..max.len() {
            let cell = &cells[row * max.len() + col];
            csv.push_str(&format!(",{} ({:.2}%)", cell.non_contributing, cell.rate * 100.0));
        }
        csv.push('\n');
    }
    match &args.out {
        Some(path) => {
            let written = write_atomic(path, csv.as_bytes())?;
            println!("{} sequences, {total} tokens -> {}", lengths.len(), written.display());
        }
        None => print!("{csv}"),
    }
    Ok(())
}

fn cmd_autocorrelation(args: AutocorrelationArgs) -> Result<()> {
    let seqs = read_token_file(&args.input)?;
    for seq in &seqs {
        let values: Vec<f64> = match args.series.as_str() {
            "tokens" => seq.tokens.iter().map(|&t| t as f64).collect(),
            "note-counts" => {
                let decoded = detokenize(seq)?;
                note_count_series(&decoded.notes, args.windows)
            }
            other => bail!("unknown series `{other}` (tokens|note-counts)"),
        };
        match autocorrelation(&values, args.lag) {
            Ok(rho) => println!("{}\tlag={}\trho={rho:.6}", seq.source_id, args.lag),
            Err(err) => println!("{}\tlag={}\terror: {err}", seq.source_id, args.lag),
        }
    }
    Ok(())
}

fn cmd_repetition(args: RepetitionArgs) -> Result<()> {
    let bytes = std::fs::read(&args.input).with_context(|| format!("reading {}", args.input.display()))?;
    let parsed = parse_midi(&bytes)?;
    let params = RepetitionParams {
        segments: args.segments,
        gram: args.gram,
        min_repeats: args.min_repeats,
    };
    let densities = repetition_density(&parsed.notes, &params)?;
    let csv = densities
        .iter()
        .map(|d| format!("{d:.6}"))
        .collect::<Vec<_>>()
        .join(",")
        + "\n";
    match &args.out {
        Some(path) => {
            write_atomic(path, csv.as_bytes())?;
        }
        None => print!("{csv}"),
    }
    Ok(())
}

fn load_piece_dir(dir: &Path) -> Result<Vec<Piece>> {
    let mut pieces = Vec::new();
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("reading directory {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    entries.sort();
    for path in entries {
        let ext = path.extension().map(|e| e.to_string_lossy().into_owned()).unwrap_or_default();
        match ext.as_str() {
            "mid" | "midi" => {
                let bytes = std::fs::read(&path)?;
                let parsed =
                    parse_midi(&bytes).with_context(|| format!("parsing {}", path.display()))?;
                pieces.push(Piece {
                    id: path.file_stem().unwrap_or_default().to_string_lossy().into_owned(),
                    notes: parsed.notes,
                });
            }
            "jsonl" | "bin" => {
                for seq in read_token_file(&path)? {
                    let decoded = detokenize(&seq)?;
                    pieces.push(Piece { id: seq.source_id, notes: decoded.notes });
                }
            }
            _ => {}
        }
    }
    if pieces.is_empty() {
        bail!("no pieces found in {}", dir.display());
    }
    Ok(pieces)
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<()> {
    let run_cfg = load_config(&args.config)?;
    let segments = run_cfg.eval_segments()?;
    let generated = load_piece_dir(&args.generated)?;
    let reference = load_piece_dir(&args.reference)?;
    let report = evaluate_sets(&generated, &reference, segments)?;
    for f in &report.features {
        println!("{:8}  kld {:8.4}  oa {:6.4}", f.kind.label(), f.kld, f.oa);
    }
    let json = serde_json::to_string_pretty(&report)?;
    let written = write_atomic(&args.out, json.as_bytes())?;
    println!("report -> {}", written.display());
    if let Some(dir) = &args.pdf_csv {
        for f in &report.features {
            let mut csv = String::from("x,inter_pdf,intra_pdf\n");
            for i in 0..f.inter_pdf.grid.points {
                csv.push_str(&format!(
                    "{},{},{}\n",
                    f.inter_pdf.grid.x(i),
                    f.inter_pdf.density[i],
                    f.intra_pdf.density[i]
                ));
            }
            let name = f.kind.label().replace('/', "_");
            write_atomic(&dir.join(format!("{name}.csv")), csv.as_bytes())?;
        }
        println!("pdf grids -> {}", dir.display());
    }
    Ok(())
}

fn cmd_pianoroll(args: PianorollArgs) -> Result<()> {
    let bytes = std::fs::read(&args.input).with_context(|| format!("reading {}", args.input.display()))?;
    let parsed = parse_midi(&bytes)?;
    let svg = pianoroll::render_svg(&parsed.notes);
    let written = write_atomic(&args.out, svg.as_bytes())?;
    println!("{} notes -> {}", parsed.notes.len(), written.display());
    Ok(())
}
