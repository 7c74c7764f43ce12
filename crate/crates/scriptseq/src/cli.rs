//! The `scriptseq` command-line surface: ingestion, training, inference,
//! evaluation, and baselines as reproducible batch commands.
//!
//! Every flag can also be given through a plain-text config file of
//! `key = value` lines (`--config run.conf`); explicit flags win. Train and
//! evaluate runs that produce an artifact also emit a `*.manifest.json`
//! next to it with the resolved arguments, seed, input digests, and
//! timings. Output files are written atomically, so a failing command never
//! leaves a partial artifact.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::corpus::{
    self, chained_pairs, read_parsed_corpus, read_sentence_lines, read_tokenized_corpus,
    sentence_pairs, Representation, SentencePair, Vocabulary, EOS_ID,
};
use crate::error::{Error, Result};
use crate::events::{extract_events, linearize_events, parse_event_tokens, Event};
use crate::fsutil::{file_digest, write_atomic};
use crate::metrics::{cloze_scores, corpus_bleu, most_common_event, MetricsReport};
use crate::numerics::{finite_diff_grad, grad_rel_error};
use crate::seqmodel::{
    backward_batch, decode_greedy, encode, load_model, pair_loss, save_model, SeqModel,
    SequenceKind, DEFAULT_MAX_DECODE_LEN,
};
use crate::training::{
    self, render_trace, train, train_chained, ChainedModels, DampQuantifier, DampSignal, LossNorm,
    TrainConfig,
};

pub const NO_EVENT: &str = "<NOEVT>";

/// Entry point for the binary: returns the process exit code.
pub fn main_entry() -> i32 {
    let raw: Vec<String> = std::env::args().skip(1).collect();
    let expanded = match expand_config_args(raw) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    let cli = match Cli::try_parse_from(
        std::iter::once("scriptseq".to_owned()).chain(expanded.iter().cloned()),
    ) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli, &expanded) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

/// Run a command from argument strings (no program name). Used by the
/// integration tests; `main_entry` wraps this for the binary.
pub fn run<S: AsRef<str>>(args: &[S]) -> Result<()> {
    let raw: Vec<String> = args.iter().map(|s| s.as_ref().to_owned()).collect();
    let expanded = expand_config_args(raw)?;
    let cli = Cli::try_parse_from(
        std::iter::once("scriptseq".to_owned()).chain(expanded.iter().cloned()),
    )
    .map_err(|e| Error::Usage(e.to_string()))?;
    dispatch(cli, &expanded)
}

/// Merge `key = value` lines from a `--config` file into the argument list.
/// Keys are long flag names without the dashes; values `true`/`false` toggle
/// bare switches. Flags already present on the command line win.
pub fn expand_config_args(args: Vec<String>) -> Result<Vec<String>> {
    let mut config_path = None;
    for (i, arg) in args.iter().enumerate() {
        if arg == "--config" {
            config_path = args.get(i + 1).map(PathBuf::from);
            if config_path.is_none() {
                return Err(Error::Usage("--config needs a file path".into()));
            }
        } else if let Some(path) = arg.strip_prefix("--config=") {
            config_path = Some(PathBuf::from(path));
        }
    }
    let Some(path) = config_path else {
        return Ok(args);
    };
    let text =
        std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let mut merged = args;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::line(&path, lineno + 1, "expected `key = value`"));
        };
        let key = key.trim();
        let value = value.trim();
        if key.is_empty() || value.is_empty() {
            return Err(Error::line(&path, lineno + 1, "expected `key = value`"));
        }
        let flag = format!("--{key}");
        let already = merged
            .iter()
            .any(|a| a == &flag || a.starts_with(&format!("{flag}=")));
        if already {
            continue;
        }
        match value.to_ascii_lowercase().as_str() {
            "true" => merged.push(flag),
            "false" => {}
            _ => {
                merged.push(flag);
                merged.push(value.to_owned());
            }
        }
    }
    Ok(merged)
}

#[derive(Parser, Debug)]
#[command(
    name = "scriptseq",
    version,
    about = "LSTM encoder-decoder prediction of successor sentences and events"
)]
struct Cli {
    /// Plain-text config file (`key = value` per line); flags win.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build a vocabulary from the K most frequent tokens of a corpus.
    BuildVocab(BuildVocabArgs),
    /// Extract verb-argument events from a parsed corpus, one line per
    /// sentence.
    ExtractEvents(ExtractEventsArgs),
    /// Rewrite a parsed corpus as an event-token corpus for vocabulary
    /// building and training.
    Linearize(LinearizeArgs),
    /// Train an encoder-decoder (or the chained two-stage system).
    Train(TrainArgs),
    /// Decode predictions for every (context, successor) pair of a corpus.
    Predict(PredictArgs),
    /// Score a predictions file against references with corpus BLEU.
    EvaluateBleu(EvaluateBleuArgs),
    /// Score event predictions against gold events with accuracy and
    /// partial credit.
    EvaluateCloze(EvaluateClozeArgs),
    /// Reference baselines: identity (input as its own successor) and
    /// most-common event.
    Baseline(BaselineArgs),
    /// Check analytic gradients against finite differences on a tiny model.
    GradCheck(GradCheckArgs),
}

#[derive(Args, Debug)]
struct BuildVocabArgs {
    /// Tokenized corpus to count.
    #[arg(long, value_name = "FILE")]
    corpus: PathBuf,
    /// Keep the K most frequent tokens.
    #[arg(long, default_value_t = 50_000)]
    k: usize,
    /// Vocabulary file to write.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ExtractEventsArgs {
    /// Parsed corpus (TSV) to extract from.
    #[arg(long, value_name = "FILE")]
    parsed: PathBuf,
    /// Output file; one line per sentence, `<NOEVT>` when a sentence has no
    /// events, blank line between documents.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Emit only each sentence's first event.
    #[arg(long)]
    first_event: bool,
    /// Skip each document's first sentence, aligning lines with
    /// (context, successor) pairs.
    #[arg(long)]
    successors_only: bool,
}

#[derive(Args, Debug)]
struct LinearizeArgs {
    /// Parsed corpus (TSV) to linearize.
    #[arg(long, value_name = "FILE")]
    parsed: PathBuf,
    /// Tokenized-corpus output (sentences without events are dropped).
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    /// Encode context tokens, decode successor tokens.
    #[value(name = "t-t")]
    TextToText,
    /// Encode context events, decode successor events.
    #[value(name = "e-e")]
    EventToEvent,
    /// Chain: events to successor events to successor text.
    #[value(name = "e-e-t")]
    EventToEventToText,
    /// Generate successor text, then ingest an external parse of it to
    /// predict the successor's first event.
    #[value(name = "t-t-e")]
    TextToTextToEvent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LossNormArg {
    MeanPerToken,
    SumTokens,
}

impl From<LossNormArg> for LossNorm {
    fn from(v: LossNormArg) -> Self {
        match v {
            LossNormArg::MeanPerToken => LossNorm::MeanPerToken,
            LossNormArg::SumTokens => LossNorm::SumTokens,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DampRuleArg {
    /// Damp when the new window average exceeds the history minimum.
    Min,
    /// Damp when it exceeds the history maximum.
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DampSignalArg {
    /// Watch training-window loss averages.
    Train,
    /// Watch held-out loss, re-evaluated each window.
    Validation,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// System schema to train.
    #[arg(long, value_enum)]
    mode: Mode,
    /// Tokenized training corpus (t-t mode).
    #[arg(long, value_name = "FILE")]
    corpus: Option<PathBuf>,
    /// Parsed training corpus (any mode; required for event modes).
    #[arg(long, value_name = "FILE")]
    parsed: Option<PathBuf>,
    /// Vocabulary file.
    #[arg(long, value_name = "FILE")]
    vocab: PathBuf,
    /// Where to write the trained model (stage 1 in e-e-t mode).
    #[arg(long, value_name = "FILE")]
    model_out: PathBuf,
    /// Where to write the stage-2 model (e-e-t mode only).
    #[arg(long, value_name = "FILE")]
    model2_out: Option<PathBuf>,
    /// Loss trace TSV (stage 1 in e-e-t mode).
    #[arg(long, value_name = "FILE")]
    trace_out: Option<PathBuf>,
    /// Stage-2 loss trace TSV.
    #[arg(long, value_name = "FILE")]
    trace2_out: Option<PathBuf>,
    /// Held-out corpus for the validation damping signal (same format as
    /// the training corpus).
    #[arg(long, value_name = "FILE")]
    validation: Option<PathBuf>,

    #[arg(long, default_value_t = 1)]
    n_context: usize,
    #[arg(long)]
    attention: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 300_000)]
    max_updates: usize,
    #[arg(long, default_value_t = 10)]
    batch_size: usize,
    #[arg(long, default_value_t = 0.1)]
    lr: f64,
    #[arg(long, default_value_t = 0.95)]
    momentum: f64,
    #[arg(long, default_value_t = 0.99)]
    lr_damp: f64,
    #[arg(long, default_value_t = 100)]
    window: usize,
    #[arg(long, default_value_t = 10)]
    history: usize,
    #[arg(long, default_value_t = 100)]
    embed_dim: usize,
    #[arg(long, default_value_t = 500)]
    hidden_dim: usize,
    #[arg(long, value_enum, default_value_t = LossNormArg::MeanPerToken)]
    loss_norm: LossNormArg,
    #[arg(long, value_enum, default_value_t = DampRuleArg::Min)]
    damp_rule: DampRuleArg,
    #[arg(long, value_enum, default_value_t = DampSignalArg::Train)]
    damp_signal: DampSignalArg,
    /// Save a checkpoint every N updates (next to the model output).
    #[arg(long, value_name = "N")]
    checkpoint_every: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Stage {
    Generate,
    Ingest,
}

#[derive(Args, Debug)]
struct PredictArgs {
    /// System schema to run.
    #[arg(long, value_enum)]
    mode: Mode,
    /// Evaluation corpus: tokenized for t-* modes, parsed TSV for e-* modes.
    #[arg(long, value_name = "FILE")]
    pairs: PathBuf,
    /// Trained model (stage 1 in e-e-t mode).
    #[arg(long, value_name = "FILE")]
    model: Option<PathBuf>,
    /// Stage-2 model (e-e-t mode).
    #[arg(long, value_name = "FILE")]
    model2: Option<PathBuf>,
    /// Predictions file to write, one line per pair.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Also write the line-aligned gold successors.
    #[arg(long, value_name = "FILE")]
    gold_out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    n_context: usize,
    /// Decode length cap.
    #[arg(long, default_value_t = DEFAULT_MAX_DECODE_LEN)]
    max_len: usize,
    /// t-t-e only: `generate` writes successor text for external parsing;
    /// `ingest` turns the externally parsed text back into first-event
    /// predictions.
    #[arg(long, value_enum)]
    stage: Option<Stage>,
    /// t-t-e ingest: the externally parsed generated text (TSV).
    #[arg(long, value_name = "FILE")]
    parsed_predictions: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvaluateBleuArgs {
    /// Candidate sentences, one per line.
    #[arg(long, value_name = "FILE")]
    candidates: PathBuf,
    /// Reference sentences, line-aligned with the candidates.
    #[arg(long, value_name = "FILE")]
    references: PathBuf,
    /// Write the report here instead of stdout (also emits a manifest).
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvaluateClozeArgs {
    /// Predicted event-token lines, one per pair.
    #[arg(long, value_name = "FILE")]
    candidates: PathBuf,
    /// Gold event-token lines, line-aligned; pairs whose gold line is
    /// `<NOEVT>` are skipped.
    #[arg(long, value_name = "FILE")]
    references: PathBuf,
    /// Write the report here instead of stdout (also emits a manifest).
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BaselineKind {
    /// Reproduce the input sentence as its own successor.
    Identity,
    /// Always guess the training corpus's most common event.
    MostCommon,
}

#[derive(Args, Debug)]
struct BaselineArgs {
    #[arg(value_enum)]
    which: BaselineKind,
    /// Evaluation corpus: tokenized (identity) or parsed TSV (most-common).
    #[arg(long, value_name = "FILE")]
    pairs: PathBuf,
    /// Parsed training corpus supplying the event counts (most-common).
    #[arg(long, value_name = "FILE")]
    parsed: Option<PathBuf>,
    /// Candidate file to write, one line per pair.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Also write the line-aligned gold successors.
    #[arg(long, value_name = "FILE")]
    gold_out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    n_context: usize,
}

#[derive(Args, Debug)]
struct GradCheckArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Include the attention block.
    #[arg(long)]
    attention: bool,
    /// Use event-style sequences (with <NULL>/<EV> tokens) instead of plain
    /// token sequences.
    #[arg(long)]
    event_level: bool,
}

#[derive(Serialize)]
struct RunManifest {
    command: String,
    argv: Vec<String>,
    seed: Option<u64>,
    inputs: Vec<ManifestInput>,
    artifacts: Vec<String>,
    started_unix_ms: u128,
    duration_ms: u128,
}

#[derive(Serialize)]
struct ManifestInput {
    path: String,
    sha256: String,
}

struct ManifestBuilder {
    command: &'static str,
    argv: Vec<String>,
    seed: Option<u64>,
    inputs: Vec<PathBuf>,
    artifacts: Vec<PathBuf>,
    started: Instant,
    started_unix_ms: u128,
}

impl ManifestBuilder {
    fn new(command: &'static str, argv: &[String]) -> Self {
        ManifestBuilder {
            command,
            argv: argv.to_vec(),
            seed: None,
            inputs: Vec::new(),
            artifacts: Vec::new(),
            started: Instant::now(),
            started_unix_ms: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_millis())
                .unwrap_or(0),
        }
    }

    fn seed(&mut self, seed: u64) -> &mut Self {
        self.seed = Some(seed);
        self
    }

    fn input(&mut self, path: &Path) -> &mut Self {
        self.inputs.push(path.to_owned());
        self
    }

    fn input_opt(&mut self, path: &Option<PathBuf>) -> &mut Self {
        if let Some(p) = path {
            self.inputs.push(p.clone());
        }
        self
    }

    fn artifact(&mut self, path: &Path) -> &mut Self {
        self.artifacts.push(path.to_owned());
        self
    }

    /// Write `<anchor>.manifest.json`.
    fn write(&self, anchor: &Path) -> Result<()> {
        let mut inputs = Vec::new();
        for path in &self.inputs {
            inputs.push(ManifestInput {
                path: path.display().to_string(),
                sha256: file_digest(path)?,
            });
        }
        let manifest = RunManifest {
            command: self.command.to_owned(),
            argv: self.argv.clone(),
            seed: self.seed,
            inputs,
            artifacts: self
                .artifacts
                .iter()
                .map(|p| p.display().to_string())
                .collect(),
            started_unix_ms: self.started_unix_ms,
            duration_ms: self.started.elapsed().as_millis(),
        };
        let json = serde_json::to_string_pretty(&manifest)
            .expect("manifest serialization cannot fail");
        let path = manifest_path(anchor);
        write_atomic(&path, json.as_bytes())
    }
}

pub fn manifest_path(anchor: &Path) -> PathBuf {
    let mut name = anchor.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    anchor.with_file_name(name)
}

fn dispatch(cli: Cli, argv: &[String]) -> Result<()> {
    match cli.command {
        Command::BuildVocab(args) => cmd_build_vocab(args),
        Command::ExtractEvents(args) => cmd_extract_events(args),
        Command::Linearize(args) => cmd_linearize(args),
        Command::Train(args) => cmd_train(args, argv),
        Command::Predict(args) => cmd_predict(args),
        Command::EvaluateBleu(args) => cmd_evaluate_bleu(args, argv),
        Command::EvaluateCloze(args) => cmd_evaluate_cloze(args, argv),
        Command::Baseline(args) => cmd_baseline(args),
        Command::GradCheck(args) => cmd_grad_check(args),
    }
}

fn cmd_build_vocab(args: BuildVocabArgs) -> Result<()> {
    let docs = read_tokenized_corpus(&args.corpus)?;
    let vocab = Vocabulary::from_sentences(docs.iter().flat_map(|d| d.sentences.iter()), args.k);
    vocab.write(&args.out)?;
    println!(
        "vocabulary of {} tokens ({} + specials) written to {}",
        vocab.len(),
        vocab.len() - 5,
        args.out.display()
    );
    Ok(())
}

fn event_line(events: &[Event], first_only: bool) -> String {
    if events.is_empty() {
        return NO_EVENT.to_owned();
    }
    let slice = if first_only { &events[..1] } else { events };
    linearize_events(slice).join(" ")
}

fn cmd_extract_events(args: ExtractEventsArgs) -> Result<()> {
    let docs = read_parsed_corpus(&args.parsed)?;
    let mut out = String::new();
    for (d, doc) in docs.iter().enumerate() {
        // In successors-only mode the output is line-aligned with
        // (context, successor) pairs, so no document separators appear.
        if d > 0 && !args.successors_only {
            out.push('\n');
        }
        let parses = doc.parses.as_ref().expect("parsed corpus");
        let skip = usize::from(args.successors_only);
        for parse in parses.iter().skip(skip) {
            out.push_str(&event_line(&extract_events(parse), args.first_event));
            out.push('\n');
        }
    }
    write_atomic(&args.out, out.as_bytes())
}

fn cmd_linearize(args: LinearizeArgs) -> Result<()> {
    let docs = read_parsed_corpus(&args.parsed)?;
    let mut out = String::new();
    let mut first_doc = true;
    for doc in &docs {
        let parses = doc.parses.as_ref().expect("parsed corpus");
        let lines: Vec<String> = parses
            .iter()
            .map(|p| extract_events(p))
            .filter(|ev| !ev.is_empty())
            .map(|ev| linearize_events(&ev).join(" "))
            .collect();
        if lines.is_empty() {
            continue;
        }
        if !first_doc {
            out.push('\n');
        }
        first_doc = false;
        for line in lines {
            out.push_str(&line);
            out.push('\n');
        }
    }
    write_atomic(&args.out, out.as_bytes())
}

fn load_train_docs(args: &TrainArgs) -> Result<Vec<corpus::Document>> {
    match (&args.corpus, &args.parsed) {
        (Some(path), None) => read_tokenized_corpus(path),
        (None, Some(path)) => read_parsed_corpus(path),
        (Some(_), Some(_)) => Err(Error::Usage(
            "give either --corpus or --parsed, not both".into(),
        )),
        (None, None) => Err(Error::Usage("a training corpus is required".into())),
    }
}

fn train_config(args: &TrainArgs) -> TrainConfig {
    TrainConfig {
        batch_size: args.batch_size,
        initial_lr: args.lr,
        momentum: args.momentum,
        lr_damp: args.lr_damp,
        window: args.window,
        history: args.history,
        max_updates: args.max_updates,
        seed: args.seed,
        embed_dim: args.embed_dim,
        hidden_dim: args.hidden_dim,
        attention: args.attention,
        n_context: args.n_context,
        loss_norm: args.loss_norm.into(),
        damp_quantifier: match args.damp_rule {
            DampRuleArg::Min => DampQuantifier::GreaterThanMin,
            DampRuleArg::Max => DampQuantifier::GreaterThanMax,
        },
        damp_signal: match args.damp_signal {
            DampSignalArg::Train => DampSignal::TrainWindow,
            DampSignalArg::Validation => DampSignal::Validation,
        },
        checkpoint_every: args.checkpoint_every,
        checkpoint_dir: args
            .checkpoint_every
            .map(|_| args.model_out.parent().unwrap_or(Path::new(".")).to_owned()),
    }
}

fn cmd_train(args: TrainArgs, argv: &[String]) -> Result<()> {
    let mut manifest = ManifestBuilder::new("train", argv);
    manifest.seed(args.seed);
    manifest.input_opt(&args.corpus);
    manifest.input_opt(&args.parsed);
    manifest.input(&args.vocab);
    manifest.input_opt(&args.validation);

    let docs = load_train_docs(&args)?;
    let vocab = Vocabulary::read(&args.vocab)?;
    let cfg = train_config(&args);

    let repr = match args.mode {
        Mode::TextToText => Representation::Tokens,
        Mode::EventToEvent => Representation::Events,
        Mode::EventToEventToText => {
            return cmd_train_chained(args, cfg, docs, vocab, manifest);
        }
        Mode::TextToTextToEvent => {
            return Err(Error::Usage(
                "t-t-e is a prediction pipeline over a t-t model; train with --mode t-t".into(),
            ));
        }
    };
    if repr == Representation::Events && docs.iter().any(|d| d.parses.is_none()) {
        return Err(Error::Usage("event-mode training needs --parsed".into()));
    }
    let pairs = sentence_pairs(&docs, cfg.n_context, repr);
    let validation = args
        .validation
        .as_ref()
        .map(|path| -> Result<Vec<SentencePair>> {
            let vdocs = match repr {
                Representation::Tokens => read_tokenized_corpus(path)?,
                Representation::Events => read_parsed_corpus(path)?,
            };
            Ok(sentence_pairs(&vdocs, cfg.n_context, repr))
        })
        .transpose()?;

    let kind = match repr {
        Representation::Tokens => SequenceKind::Tokens,
        Representation::Events => SequenceKind::Events,
    };
    let (model, trace) = train(&cfg, &pairs, validation.as_deref(), &vocab, kind)?;

    save_model(&model, &args.model_out)?;
    manifest.artifact(&args.model_out);
    if let Some(trace_out) = &args.trace_out {
        write_atomic(trace_out, render_trace(&trace).as_bytes())?;
        manifest.artifact(trace_out);
    }
    manifest.write(&args.model_out)?;
    println!(
        "trained {} model on {} pairs for {} updates; wrote {}",
        args.mode.label(),
        pairs.len(),
        cfg.max_updates,
        args.model_out.display()
    );
    Ok(())
}

fn cmd_train_chained(
    args: TrainArgs,
    cfg: TrainConfig,
    docs: Vec<corpus::Document>,
    vocab: Vocabulary,
    mut manifest: ManifestBuilder,
) -> Result<()> {
    if docs.iter().any(|d| d.parses.is_none()) {
        return Err(Error::Usage("e-e-t training needs --parsed".into()));
    }
    let model2_out = args
        .model2_out
        .as_ref()
        .ok_or_else(|| Error::Usage("e-e-t training needs --model2-out".into()))?;
    let (models, trace1, trace2) = train_chained(&cfg, &docs, &vocab)?;
    save_model(&models.stage1, &args.model_out)?;
    save_model(&models.stage2, model2_out)?;
    manifest.artifact(&args.model_out);
    manifest.artifact(model2_out);
    if let Some(path) = &args.trace_out {
        write_atomic(path, render_trace(&trace1).as_bytes())?;
        manifest.artifact(path);
    }
    if let Some(path) = &args.trace2_out {
        write_atomic(path, render_trace(&trace2).as_bytes())?;
        manifest.artifact(path);
    }
    manifest.write(&args.model_out)?;
    println!(
        "trained chained models; wrote {} and {}",
        args.model_out.display(),
        model2_out.display()
    );
    Ok(())
}

impl Mode {
    fn label(self) -> &'static str {
        match self {
            Mode::TextToText => "t-t",
            Mode::EventToEvent => "e-e",
            Mode::EventToEventToText => "e-e-t",
            Mode::TextToTextToEvent => "t-t-e",
        }
    }
}

fn require_kind(model: &SeqModel, expected: SequenceKind, role: &str) -> Result<()> {
    if model.kind != expected {
        return Err(Error::Usage(format!(
            "{role} model decodes {} but this mode needs {}",
            model.kind.as_str(),
            expected.as_str()
        )));
    }
    Ok(())
}

fn decode_to_tokens(model: &SeqModel, ids: &[u32]) -> Vec<String> {
    ids.iter()
        .filter(|&&id| id != EOS_ID)
        .map(|&id| model.vocab.token(id).to_owned())
        .collect()
}

fn render_lines(lines: &[Vec<String>]) -> String {
    let mut out = String::new();
    for line in lines {
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

fn cmd_predict(args: PredictArgs) -> Result<()> {
    match args.mode {
        Mode::TextToText => predict_direct(&args, SequenceKind::Tokens),
        Mode::EventToEvent => predict_direct(&args, SequenceKind::Events),
        Mode::EventToEventToText => predict_chained(&args),
        Mode::TextToTextToEvent => match args.stage {
            Some(Stage::Generate) => predict_direct(&args, SequenceKind::Tokens),
            Some(Stage::Ingest) => predict_ingest(&args),
            None => Err(Error::Usage(
                "t-t-e needs --stage generate or --stage ingest".into(),
            )),
        },
    }
}

fn predict_direct(args: &PredictArgs, kind: SequenceKind) -> Result<()> {
    let model_path = args
        .model
        .as_ref()
        .ok_or_else(|| Error::Usage("predict needs --model".into()))?;
    let model = load_model(model_path)?;
    require_kind(&model, kind, "the")?;
    let pairs = match kind {
        SequenceKind::Tokens => {
            let docs = read_tokenized_corpus(&args.pairs)?;
            sentence_pairs(&docs, args.n_context, Representation::Tokens)
        }
        SequenceKind::Events => {
            let docs = read_parsed_corpus(&args.pairs)?;
            sentence_pairs(&docs, args.n_context, Representation::Events)
        }
    };
    let mut predictions = Vec::with_capacity(pairs.len());
    for pair in &pairs {
        let enc = encode(&model, &pair.encode_context(&model.vocab));
        let out = decode_greedy(&model, &enc, args.max_len);
        predictions.push(decode_to_tokens(&model, &out));
    }
    write_atomic(&args.out, render_lines(&predictions).as_bytes())?;
    if let Some(gold_out) = &args.gold_out {
        let gold: Vec<Vec<String>> = pairs.iter().map(|p| p.successor.clone()).collect();
        write_atomic(gold_out, render_lines(&gold).as_bytes())?;
    }
    println!("wrote {} predictions to {}", predictions.len(), args.out.display());
    Ok(())
}

fn predict_chained(args: &PredictArgs) -> Result<()> {
    let stage1_path = args
        .model
        .as_ref()
        .ok_or_else(|| Error::Usage("e-e-t needs --model (stage 1)".into()))?;
    let stage2_path = args
        .model2
        .as_ref()
        .ok_or_else(|| Error::Usage("e-e-t needs --model2 (stage 2)".into()))?;
    let models = ChainedModels {
        stage1: load_model(stage1_path)?,
        stage2: load_model(stage2_path)?,
    };
    require_kind(&models.stage1, SequenceKind::Events, "the stage-1")?;
    require_kind(&models.stage2, SequenceKind::Tokens, "the stage-2")?;

    let docs = read_parsed_corpus(&args.pairs)?;
    let pairs = chained_pairs(&docs, args.n_context);
    let mut predictions = Vec::with_capacity(pairs.len());
    for pair in &pairs {
        let input = pair.encode_context(&models.stage1.vocab);
        let out = training::chained_greedy(&models, &input, args.max_len);
        predictions.push(decode_to_tokens(&models.stage2, &out));
    }
    write_atomic(&args.out, render_lines(&predictions).as_bytes())?;
    if let Some(gold_out) = &args.gold_out {
        let gold: Vec<Vec<String>> = pairs.iter().map(|p| p.successor.clone()).collect();
        write_atomic(gold_out, render_lines(&gold).as_bytes())?;
    }
    println!("wrote {} predictions to {}", predictions.len(), args.out.display());
    Ok(())
}

/// Second half of the t-t-e pipeline: the generated text was parsed by an
/// external dependency parser; each parsed sentence (in order, across
/// documents) is one pair's prediction.
fn predict_ingest(args: &PredictArgs) -> Result<()> {
    let parsed = args
        .parsed_predictions
        .as_ref()
        .ok_or_else(|| Error::Usage("--stage ingest needs --parsed-predictions".into()))?;
    let docs = read_parsed_corpus(parsed)?;
    let mut out = String::new();
    for doc in &docs {
        for parse in doc.parses.as_ref().expect("parsed corpus") {
            out.push_str(&event_line(&extract_events(parse), true));
            out.push('\n');
        }
    }
    write_atomic(&args.out, out.as_bytes())?;
    println!("wrote first-event predictions to {}", args.out.display());
    Ok(())
}

fn cmd_evaluate_bleu(args: EvaluateBleuArgs, argv: &[String]) -> Result<()> {
    let mut manifest = ManifestBuilder::new("evaluate-bleu", argv);
    manifest.input(&args.candidates).input(&args.references);
    let candidates = read_sentence_lines(&args.candidates)?;
    let references = read_sentence_lines(&args.references)?;
    let report = corpus_bleu(&candidates, &references)?;
    emit_report(&report, &args.out, manifest)
}

fn cmd_evaluate_cloze(args: EvaluateClozeArgs, argv: &[String]) -> Result<()> {
    let mut manifest = ManifestBuilder::new("evaluate-cloze", argv);
    manifest.input(&args.candidates).input(&args.references);
    let cand_lines = read_sentence_lines(&args.candidates)?;
    let ref_lines = read_sentence_lines(&args.references)?;
    if cand_lines.len() != ref_lines.len() {
        return Err(Error::Misaligned(format!(
            "{} candidate lines vs {} reference lines",
            cand_lines.len(),
            ref_lines.len()
        )));
    }
    let first_event = |line: &[String]| -> Option<Event> {
        if line.iter().any(|t| t == NO_EVENT) {
            return None;
        }
        parse_event_tokens(line).events.into_iter().next()
    };
    let mut predicted = Vec::new();
    let mut gold = Vec::new();
    for (cand, reference) in cand_lines.iter().zip(&ref_lines) {
        match first_event(reference) {
            None => continue, // no gold event for this pair
            Some(g) => {
                gold.push(g);
                predicted.push(first_event(cand));
            }
        }
    }
    let (accuracy, partial) = cloze_scores(&predicted, &gold)?;
    let report = MetricsReport {
        accuracy,
        partial_credit: partial,
        n_pairs: gold.len(),
        ..Default::default()
    };
    emit_report(&report, &args.out, manifest)
}

fn emit_report(
    report: &MetricsReport,
    out: &Option<PathBuf>,
    mut manifest: ManifestBuilder,
) -> Result<()> {
    let text = report.render();
    match out {
        Some(path) => {
            write_atomic(path, text.as_bytes())?;
            manifest.artifact(path);
            manifest.write(path)?;
            println!("{text}");
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_baseline(args: BaselineArgs) -> Result<()> {
    match args.which {
        BaselineKind::Identity => {
            let docs = read_tokenized_corpus(&args.pairs)?;
            let pairs = sentence_pairs(&docs, args.n_context, Representation::Tokens);
            // The candidate is the pair's input sentence: the one
            // immediately before the successor.
            let candidates: Vec<Vec<String>> = pairs
                .iter()
                .map(|p| p.context.last().cloned().unwrap_or_default())
                .collect();
            write_atomic(&args.out, render_lines(&candidates).as_bytes())?;
            if let Some(gold_out) = &args.gold_out {
                let gold: Vec<Vec<String>> = pairs.iter().map(|p| p.successor.clone()).collect();
                write_atomic(gold_out, render_lines(&gold).as_bytes())?;
            }
            println!("wrote {} identity candidates to {}", candidates.len(), args.out.display());
        }
        BaselineKind::MostCommon => {
            let train_path = args.parsed.as_ref().ok_or_else(|| {
                Error::Usage("baseline most-common needs --parsed (training corpus)".into())
            })?;
            let train_docs = read_parsed_corpus(train_path)?;
            let mut all_events = Vec::new();
            for doc in &train_docs {
                for parse in doc.parses.as_ref().expect("parsed corpus") {
                    all_events.extend(extract_events(parse));
                }
            }
            let modal = most_common_event(&all_events)?;
            let line = linearize_events(std::slice::from_ref(&modal)).join(" ");

            let eval_docs = read_parsed_corpus(&args.pairs)?;
            let pairs = sentence_pairs(&eval_docs, args.n_context, Representation::Events);
            let mut out = String::new();
            for _ in &pairs {
                out.push_str(&line);
                out.push('\n');
            }
            write_atomic(&args.out, out.as_bytes())?;
            if let Some(gold_out) = &args.gold_out {
                let gold: Vec<Vec<String>> = pairs.iter().map(|p| p.successor.clone()).collect();
                write_atomic(gold_out, render_lines(&gold).as_bytes())?;
            }
            println!(
                "wrote {} copies of the modal event ({}) to {}",
                pairs.len(),
                line,
                args.out.display()
            );
        }
    }
    Ok(())
}

fn cmd_grad_check(args: GradCheckArgs) -> Result<()> {
    use rand::{Rng, SeedableRng};
    let kind = if args.event_level {
        SequenceKind::Events
    } else {
        SequenceKind::Tokens
    };
    // Tiny model: vocab 12 (5 specials + 7 tokens), embed 4, hidden 8.
    let vocab =
        Vocabulary::from_listed_tokens(["ran", "dog", "cat", "saw", "road", "to", "home"])
            .unwrap();
    let model = SeqModel::new_random(vocab, kind, 4, 8, args.attention, args.seed);

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(args.seed.wrapping_mul(31).wrapping_add(7));
    let sample = |rng: &mut rand_chacha::ChaCha8Rng, len: usize| -> Vec<u32> {
        let mut ids = vec![crate::corpus::BOS_ID];
        if args.event_level {
            // verb subj obj shapes with <NULL>/<EV> interspersed
            for i in 0..len {
                ids.push(match i % 4 {
                    0 => rng.gen_range(5..12),
                    1 => crate::corpus::NULL_ID,
                    2 => rng.gen_range(5..12),
                    _ => crate::corpus::EV_ID,
                });
            }
        } else {
            ids.extend((0..len).map(|_| rng.gen_range(5..12)));
        }
        ids.push(EOS_ID);
        ids
    };
    let batch: Vec<(Vec<u32>, Vec<u32>)> = (0..2)
        .map(|_| {
            let ilen = rng.gen_range(1..=4);
            let tlen = rng.gen_range(1..=4);
            (sample(&mut rng, ilen), sample(&mut rng, tlen))
        })
        .collect();

    let (grads, _) = backward_batch(&model, &batch)?;
    let analytic = grads.to_flat();
    let flat0 = model.params.to_flat();
    let mut probe = model.clone();
    let numeric = finite_diff_grad(
        |flat| {
            probe.params.copy_from_flat(flat);
            batch.iter().map(|(i, t)| pair_loss(&probe, i, t)).sum()
        },
        &flat0,
        1e-5,
    );
    let max_err = analytic
        .iter()
        .zip(&numeric)
        .map(|(&a, &n)| grad_rel_error(a, n))
        .fold(0.0, f64::max);

    println!(
        "max relative gradient error: {max_err:.3e} over {} parameters ({}, attention {})",
        analytic.len(),
        kind.as_str(),
        if args.attention { "on" } else { "off" },
    );
    if max_err < 1e-4 {
        println!("gradient check passed (threshold 1e-4)");
        Ok(())
    } else {
        Err(Error::Usage(format!(
            "gradient check FAILED: max relative error {max_err:.3e} >= 1e-4"
        )))
    }
}
