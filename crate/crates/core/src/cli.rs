//! Command-line front end. Exit codes: 0 success, 1 usage error, 2 data or
//! validation error (including a failed gradient check).

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::dict::{build_dictionary_streaming, CountConfig, NgramCounter, NgramDictionary};
use crate::encoder::{grad_check, GradCheckDims, SpanLimits, Variant};
use crate::error::{Error, Result};
use crate::frozen::{save_embeddings, toy_encode, EmbeddingMatrix, ToyEncoderConfig};
use crate::metrics::{
    binary_report, mcnemar_from_counts, mcnemar_test, McNemarResult, MetricReport,
    PairedPredictions,
};
use crate::segment::{
    normalize_and_tokenize, span_count_curve, write_segmentation, WordSequence, STATS_HEADER,
};
use crate::train::{
    load_dataset, predict, prepare, train_with, Architecture, EmbeddingSource, LabeledExample,
    PreparedExample, Segmentation, SpanModel, TrainConfig,
};

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Parser)]
#[command(
    name = "spanft",
    version,
    about = "Span segmentation, span encoding and toy fine-tuning"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Count word n-grams in a corpus and write a dictionary.
    #[command(args_override_self = true)]
    BuildDict(BuildDictArgs),
    /// Keep the most frequent entries of a dictionary.
    #[command(args_override_self = true)]
    PruneDict(PruneDictArgs),
    /// Segment sentences into spans, one JSON record per line.
    #[command(args_override_self = true)]
    Segment(SegmentArgs),
    /// Span-count statistics, optionally over a sweep of dictionary sizes.
    #[command(args_override_self = true)]
    Stats(StatsArgs),
    /// Encode sentences with the toy contextual encoder.
    #[command(args_override_self = true)]
    Encode(EncodeArgs),
    /// Train a span model and classifier head.
    #[command(args_override_self = true)]
    Train(TrainArgs),
    /// Evaluate a trained model on a labeled dataset.
    #[command(args_override_self = true)]
    Eval(EvalArgs),
    /// Compare analytic and finite-difference encoder gradients.
    #[command(args_override_self = true)]
    Gradcheck(GradcheckArgs),
    /// McNemar test on two systems' predictions.
    #[command(args_override_self = true)]
    Mcnemar(McnemarArgs),
}

#[derive(Debug, Args)]
struct ConfigArg {
    /// JSON object whose keys mirror flag names; explicit flags win.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BuildDictArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value_t = crate::dict::DEFAULT_MAX_N)]
    max_n: usize,
    #[arg(long, default_value_t = crate::dict::DEFAULT_MIN_COUNT)]
    min_count: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Tokens per in-memory shard before spilling to disk.
    #[arg(long, default_value_t = CountConfig::default().shard_budget)]
    shard_budget: usize,
    #[arg(long)]
    spill_dir: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArg,
}

#[derive(Debug, Args)]
struct PruneDictArgs {
    #[arg(long)]
    dict: PathBuf,
    #[arg(long)]
    size: usize,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    config: ConfigArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum SegMode {
    Greedy,
    Random,
    Singleton,
}

#[derive(Debug, Args)]
struct SegmentationArgs {
    /// Dictionary for greedy segmentation.
    #[arg(long)]
    dict: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = SegMode::Greedy)]
    mode: SegMode,
    /// Longest span produced by random segmentation.
    #[arg(long, default_value_t = 5)]
    max_span_len: usize,
}

#[derive(Debug, Args)]
struct SegmentArgs {
    /// Sentences, one per line; blank lines are skipped.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    seg: SegmentationArgs,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[command(flatten)]
    config: ConfigArg,
}

#[derive(Debug, Args)]
struct StatsArgs {
    #[arg(long)]
    dict: PathBuf,
    #[arg(long = "in")]
    input: PathBuf,
    /// Comma-separated dictionary sizes; the full dictionary when absent.
    #[arg(long, value_delimiter = ',')]
    dict_sizes: Vec<usize>,
    /// Also write the report here.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum InputFormat {
    /// One sentence per line.
    Text,
    /// JSON-lines dataset; pairs are encoded as one word sequence.
    Dataset,
}

#[derive(Debug, Args)]
struct ToyArgs {
    #[arg(long, default_value_t = 32)]
    d: usize,
    #[arg(long, default_value_t = 0.5)]
    context_mix: f64,
}

#[derive(Debug, Args)]
struct EncodeArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = InputFormat::Text)]
    format: InputFormat,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    toy: ToyArgs,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[command(flatten)]
    config: ConfigArg,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    dev: Option<PathBuf>,
    /// Precomputed embeddings for the training set instead of the toy encoder.
    #[arg(long)]
    train_embeddings: Option<PathBuf>,
    #[arg(long, requires = "train_embeddings")]
    dev_embeddings: Option<PathBuf>,
    #[command(flatten)]
    seg: SegmentationArgs,
    #[command(flatten)]
    toy: ToyArgs,
    /// Encoder variant or `cls_only`.
    #[arg(long, default_value = "cnn_cnn")]
    variant: String,
    #[arg(long, default_value_t = 16)]
    r: usize,
    #[arg(long, default_value_t = 64)]
    l: usize,
    #[arg(long, default_value_t = crate::encoder::DEFAULT_KERNEL)]
    kernel: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 0.1)]
    warmup_ratio: f64,
    #[arg(long, default_value_t = 0.01)]
    weight_decay: f64,
    #[arg(long, default_value_t = 16)]
    batch_size: usize,
    #[arg(long, default_value_t = 3)]
    epochs: usize,
    /// Number of classes; inferred from the data when absent.
    #[arg(long)]
    labels: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Model file to write.
    #[arg(long)]
    out: PathBuf,
    /// Per-epoch metrics as JSON lines.
    #[arg(long)]
    history: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArg,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Dictionary, required for models trained with greedy segmentation.
    #[arg(long)]
    dict: Option<PathBuf>,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Predicted labels, one per line.
    #[arg(long)]
    predictions: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArg,
}

#[derive(Debug, Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 3)]
    d: usize,
    #[arg(long, default_value_t = 2)]
    r: usize,
    #[arg(long, default_value_t = 4)]
    l: usize,
    #[arg(long, default_value_t = crate::encoder::DEFAULT_KERNEL)]
    k: usize,
    #[arg(long, default_value = "cnn_cnn")]
    variant: Variant,
    #[arg(long, default_value_t = 1e-5)]
    eps: f64,
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[command(flatten)]
    config: ConfigArg,
}

#[derive(Debug, Args)]
struct McnemarArgs {
    /// Gold labels, one per line.
    #[arg(long, requires_all = ["a", "b"], conflicts_with_all = ["b_count", "c_count"])]
    gold: Option<PathBuf>,
    /// Predictions of system A.
    #[arg(long, requires = "gold")]
    a: Option<PathBuf>,
    /// Predictions of system B.
    #[arg(long, requires = "gold")]
    b: Option<PathBuf>,
    /// Discordant count: A correct, B wrong.
    #[arg(long, requires = "c_count")]
    b_count: Option<u64>,
    /// Discordant count: A wrong, B correct.
    #[arg(long, requires = "b_count")]
    c_count: Option<u64>,
    #[command(flatten)]
    config: ConfigArg,
}

/// What the CLI stores next to the trained parameters so `eval` can rebuild
/// the same inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub segmentation: SegmentationSpec,
    pub encoder: EncoderSpec,
    pub model: SpanModel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum SegmentationSpec {
    Greedy,
    Random { seed: u64, max_len: usize },
    Singleton,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum EncoderSpec {
    Toy(ToyEncoderConfig),
    Precomputed { d: usize },
}

/// Runs one invocation and returns its exit code.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let argv = match expand_config(argv) {
        Ok(a) => a,
        Err(e) => return report(e, stderr),
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{e}");
                    0
                }
                _ => {
                    let _ = write!(stderr, "{e}");
                    1
                }
            };
        }
    };
    match dispatch(cli.command, stdout) {
        Ok(code) => code,
        Err(e) => report(e, stderr),
    }
}

fn report(e: Error, stderr: &mut dyn Write) -> i32 {
    let _ = writeln!(stderr, "error: {e}");
    if e.is_usage() {
        1
    } else {
        2
    }
}

/// Splices the keys of a `--config` file in as flags right after the
/// subcommand, so later explicit flags override them.
fn expand_config(argv: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some(sub) = argv
        .iter()
        .skip(1)
        .position(|a| !a.to_string_lossy().starts_with('-'))
    else {
        return Ok(argv);
    };
    let sub = sub + 1;
    let mut path = None;
    for (i, a) in argv.iter().enumerate().skip(sub + 1) {
        let a = a.to_string_lossy();
        if a == "--config" {
            path = argv.get(i + 1).map(PathBuf::from);
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(PathBuf::from(p));
        }
    }
    let Some(path) = path else {
        return Ok(argv);
    };
    let flags = config_flags(&path).map_err(|e| e.in_file(&path))?;
    let mut out = argv[..=sub].to_vec();
    out.extend(flags.into_iter().map(OsString::from));
    out.extend_from_slice(&argv[sub + 1..]);
    Ok(out)
}

fn config_flags(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path)?;
    let value: Value = serde_json::from_str(&text).map_err(|e| Error::Parse {
        line: e.line(),
        message: e.to_string(),
    })?;
    let Value::Object(map) = value else {
        return Err(Error::Format("config must be a JSON object".into()));
    };
    let mut flags = Vec::new();
    for (key, value) in map {
        let flag = format!("--{}", key.replace('_', "-"));
        if flag == "--config" {
            return Err(Error::Argument(
                "config files cannot include other config files".into(),
            ));
        }
        let scalar = |v: &Value| -> Result<String> {
            match v {
                Value::String(s) => Ok(s.clone()),
                Value::Number(n) => Ok(n.to_string()),
                other => Err(Error::Argument(format!(
                    "config key {key:?}: unsupported value {other}"
                ))),
            }
        };
        match &value {
            Value::Null | Value::Bool(false) => {}
            Value::Bool(true) => flags.push(flag),
            Value::Array(items) => {
                let parts: Vec<String> = items.iter().map(scalar).collect::<Result<_>>()?;
                flags.push(flag);
                flags.push(parts.join(","));
            }
            other => {
                flags.push(flag);
                flags.push(scalar(other)?);
            }
        }
    }
    Ok(flags)
}

fn dispatch(command: Command, out: &mut dyn Write) -> Result<i32> {
    match command {
        Command::BuildDict(a) => build_dict(a, out),
        Command::PruneDict(a) => prune_dict(a, out),
        Command::Segment(a) => segment(a, out),
        Command::Stats(a) => stats(a, out),
        Command::Encode(a) => encode(a, out),
        Command::Train(a) => train_cmd(a, out),
        Command::Eval(a) => eval_cmd(a, out),
        Command::Gradcheck(a) => gradcheck(a, out),
        Command::Mcnemar(a) => mcnemar(a, out),
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::from(e).in_file(path))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::from(e).in_file(path))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::from(e).in_file(path))
}

/// Non-blank lines with their 1-based line numbers.
fn read_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let mut out = Vec::new();
    for (idx, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| {
            let err = if e.kind() == std::io::ErrorKind::InvalidData {
                Error::Parse {
                    line: idx + 1,
                    message: "invalid UTF-8".into(),
                }
            } else {
                Error::from(e)
            };
            err.in_file(path)
        })?;
        if !line.trim().is_empty() {
            out.push((idx + 1, line));
        }
    }
    Ok(out)
}

fn read_sentences(path: &Path) -> Result<Vec<WordSequence>> {
    read_lines(path)?
        .into_iter()
        .map(|(line, text)| {
            normalize_and_tokenize(&text).map_err(|e| {
                Error::Parse {
                    line,
                    message: e.to_string(),
                }
                .in_file(path)
            })
        })
        .collect()
}

fn read_labels(path: &Path) -> Result<Vec<usize>> {
    read_lines(path)?
        .into_iter()
        .map(|(line, text)| {
            text.trim().parse().map_err(|_| {
                Error::Parse {
                    line,
                    message: format!(
                        "expected a non-negative integer label, found {:?}",
                        text.trim()
                    ),
                }
                .in_file(path)
            })
        })
        .collect()
}

fn load_dict(path: &Path) -> Result<NgramDictionary> {
    NgramDictionary::load(path)
}

fn build_dict(a: BuildDictArgs, out: &mut dyn Write) -> Result<i32> {
    if a.threads == 0 {
        return Err(Error::Argument("--threads must be positive".into()));
    }
    let config = CountConfig {
        max_n: a.max_n,
        shard_budget: a.shard_budget,
        threads: a.threads,
        spill_dir: a.spill_dir.clone(),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.threads)
        .build()
        .map_err(|e| Error::Argument(e.to_string()))?;
    let dict = pool.install(|| -> Result<NgramDictionary> {
        let mut counter = NgramCounter::new(config)?;
        crate::dict::feed_reader(open(&a.corpus)?, &mut counter)
            .map_err(|e| e.in_file(&a.corpus))?;
        build_dictionary_streaming(counter.finish()?, a.min_count)
    })?;
    dict.save(&a.out)?;
    writeln!(out, "entries\t{}", dict.size())?;
    Ok(0)
}

fn prune_dict(a: PruneDictArgs, out: &mut dyn Write) -> Result<i32> {
    let dict = load_dict(&a.dict)?.prune_to_size(a.size);
    dict.save(&a.out)?;
    writeln!(out, "entries\t{}", dict.size())?;
    Ok(0)
}

fn segmentation<'a>(
    mode: SegMode,
    dict: Option<&'a NgramDictionary>,
    seed: u64,
    max_len: usize,
) -> Result<Segmentation<'a>> {
    Ok(match mode {
        SegMode::Greedy => Segmentation::Greedy(
            dict.ok_or_else(|| Error::Argument("greedy segmentation needs --dict".into()))?,
        ),
        SegMode::Random => Segmentation::Random { seed, max_len },
        SegMode::Singleton => Segmentation::Singletons,
    })
}

fn segment(a: SegmentArgs, out: &mut dyn Write) -> Result<i32> {
    let dict = a.seg.dict.as_deref().map(load_dict).transpose()?;
    let seg = segmentation(a.seg.mode, dict.as_ref(), a.seed, a.seg.max_span_len)?;
    let sentences = read_sentences(&a.input)?;
    let records = sentences
        .into_iter()
        .enumerate()
        .map(|(i, w)| seg.partition(&w, i as u64).map(|p| (w, p)))
        .collect::<Result<Vec<_>>>()?;
    let w = create(&a.out)?;
    write_segmentation(w, &records).map_err(|e| e.in_file(&a.out))?;
    let spans: usize = records.iter().map(|(_, p)| p.len()).sum();
    writeln!(out, "sentences\t{}\tspans\t{}", records.len(), spans)?;
    Ok(0)
}

fn stats(a: StatsArgs, out: &mut dyn Write) -> Result<i32> {
    let dict = load_dict(&a.dict)?;
    let sentences = read_sentences(&a.input)?;
    if sentences.is_empty() {
        return Err(Error::EmptyInput(format!(
            "no sentences in {}",
            a.input.display()
        )));
    }
    let sizes = if a.dict_sizes.is_empty() {
        vec![dict.size()]
    } else {
        a.dict_sizes.clone()
    };
    let rows = span_count_curve(&sentences, &dict, &sizes)?;
    let mut text = String::new();
    text.push_str(STATS_HEADER);
    text.push('\n');
    for row in &rows {
        text.push_str(&row.report_line());
        text.push('\n');
    }
    out.write_all(text.as_bytes())?;
    if let Some(path) = &a.out {
        let mut w = create(path)?;
        w.write_all(text.as_bytes())
            .map_err(|e| Error::from(e).in_file(path))?;
        finish(w, path)?;
    }
    Ok(0)
}

fn toy_config(toy: &ToyArgs, seed: u64) -> Result<ToyEncoderConfig> {
    let cfg = ToyEncoderConfig {
        d: toy.d,
        seed,
        context_mix: toy.context_mix,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn encode(a: EncodeArgs, out: &mut dyn Write) -> Result<i32> {
    let cfg = toy_config(&a.toy, a.seed)?;
    let matrices: Vec<EmbeddingMatrix> = match a.format {
        InputFormat::Text => read_sentences(&a.input)?
            .iter()
            .map(|w| toy_encode(w.words(), &cfg).map(|t| EmbeddingMatrix::from_embeddings(&t)))
            .collect::<Result<_>>()?,
        InputFormat::Dataset => {
            let data = load_dataset(&a.input)?;
            prepare(
                &data,
                Segmentation::Singletons,
                &EmbeddingSource::Toy(cfg),
                0,
            )
            .map_err(|e| e.in_file(&a.input))?
            .iter()
            .map(|p| EmbeddingMatrix::from_embeddings(&p.embeddings))
            .collect()
        }
    };
    save_embeddings(&a.out, cfg.d, &matrices)?;
    writeln!(out, "sentences\t{}\td\t{}", matrices.len(), cfg.d)?;
    Ok(0)
}

fn load_precomputed(path: &Path) -> Result<Vec<crate::encoder::ContextualEmbeddings>> {
    let (_, matrices) = crate::frozen::load_embeddings(path)?;
    matrices
        .iter()
        .map(EmbeddingMatrix::to_embeddings)
        .collect::<Result<_>>()
        .map_err(|e| e.in_file(path))
}

fn prepare_file(
    data: &[LabeledExample],
    path: &Path,
    seg: Segmentation<'_>,
    source: &EmbeddingSource,
    offset: u64,
) -> Result<Vec<PreparedExample>> {
    prepare(data, seg, source, offset).map_err(|e| e.in_file(path))
}

fn train_cmd(a: TrainArgs, out: &mut dyn Write) -> Result<i32> {
    let architecture: Architecture = a.variant.parse()?;
    let dict = a.seg.dict.as_deref().map(load_dict).transpose()?;
    let seg = segmentation(a.seg.mode, dict.as_ref(), a.seed, a.seg.max_span_len)?;
    let train_data = load_dataset(&a.train)?;
    if train_data.is_empty() {
        return Err(Error::EmptyInput(format!(
            "no examples in {}",
            a.train.display()
        )));
    }
    let dev_data = a.dev.as_deref().map(load_dataset).transpose()?;
    let (train_source, dev_source, encoder) = match &a.train_embeddings {
        Some(path) => {
            let train_t = load_precomputed(path)?;
            let d = train_t.first().map_or(0, |t| t.dim());
            let dev_source = match (&a.dev_embeddings, &dev_data) {
                (Some(p), _) => Some(EmbeddingSource::Precomputed(load_precomputed(p)?)),
                (None, Some(_)) => {
                    return Err(Error::Argument(
                        "--dev with --train-embeddings also needs --dev-embeddings".into(),
                    ))
                }
                (None, None) => None,
            };
            (
                EmbeddingSource::Precomputed(train_t),
                dev_source,
                EncoderSpec::Precomputed { d },
            )
        }
        None => {
            let cfg = toy_config(&a.toy, a.seed)?;
            (
                EmbeddingSource::Toy(cfg),
                Some(EmbeddingSource::Toy(cfg)),
                EncoderSpec::Toy(cfg),
            )
        }
    };
    let train_set = prepare_file(&train_data, &a.train, seg, &train_source, 0)?;
    let dev_set = match (&dev_data, &dev_source, &a.dev) {
        // Indexed from zero, like `eval`, so random spans match between the two.
        (Some(data), Some(source), Some(path)) => Some(prepare_file(data, path, seg, source, 0)?),
        _ => None,
    };
    let max_label = train_data
        .iter()
        .chain(dev_data.iter().flatten())
        .map(|e| e.label)
        .max()
        .unwrap_or(0);
    let labels = a.labels.unwrap_or((max_label + 1).max(2));
    let config = TrainConfig {
        architecture,
        limits: SpanLimits::new(a.r, a.l),
        kernel: a.kernel,
        lr: a.lr,
        warmup_ratio: a.warmup_ratio,
        weight_decay: a.weight_decay,
        batch_size: a.batch_size,
        epochs: a.epochs,
        seed: a.seed,
        ..Default::default()
    };
    let mut lines = Vec::new();
    let outcome = train_with(&train_set, dev_set.as_deref(), labels, &config, |m| {
        let mut line = format!("epoch {}\tloss {:.6}", m.epoch, m.train_loss);
        if let Some(dev) = &m.dev {
            line.push_str(&format!("\tdev_accuracy {:.6}", dev.accuracy));
        }
        lines.push(line);
    })?;
    for line in lines {
        writeln!(out, "{line}")?;
    }
    let bundle = ModelBundle {
        segmentation: match a.seg.mode {
            SegMode::Greedy => SegmentationSpec::Greedy,
            SegMode::Random => SegmentationSpec::Random {
                seed: a.seed,
                max_len: a.seg.max_span_len,
            },
            SegMode::Singleton => SegmentationSpec::Singleton,
        },
        encoder,
        model: outcome.model.clone(),
    };
    let mut w = create(&a.out)?;
    serde_json::to_writer(&mut w, &bundle)
        .map_err(|e| Error::Format(e.to_string()).in_file(&a.out))?;
    finish(w, &a.out)?;
    if let Some(path) = &a.history {
        let mut w = create(path)?;
        outcome.write_history(&mut w).map_err(|e| e.in_file(path))?;
        finish(w, path)?;
    }
    Ok(0)
}

pub fn load_bundle(path: &Path) -> Result<ModelBundle> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).in_file(path))?;
    let bundle: ModelBundle = serde_json::from_str(&text).map_err(|e| {
        Error::Parse {
            line: e.line(),
            message: e.to_string(),
        }
        .in_file(path)
    })?;
    if let Some(p) = &bundle.model.encoder {
        p.validate().map_err(|e| e.in_file(path))?;
    }
    Ok(bundle)
}

fn eval_cmd(a: EvalArgs, out: &mut dyn Write) -> Result<i32> {
    let bundle = load_bundle(&a.model)?;
    let dict = a.dict.as_deref().map(load_dict).transpose()?;
    let seg = match bundle.segmentation {
        SegmentationSpec::Greedy => segmentation(SegMode::Greedy, dict.as_ref(), 0, 0)?,
        SegmentationSpec::Random { seed, max_len } => Segmentation::Random { seed, max_len },
        SegmentationSpec::Singleton => Segmentation::Singletons,
    };
    let source = match (bundle.encoder, &a.embeddings) {
        (_, Some(path)) => EmbeddingSource::Precomputed(load_precomputed(path)?),
        (EncoderSpec::Toy(cfg), None) => EmbeddingSource::Toy(cfg),
        (EncoderSpec::Precomputed { .. }, None) => {
            return Err(Error::Argument(
                "model was trained on precomputed embeddings; pass --embeddings".into(),
            ))
        }
    };
    let data = load_dataset(&a.data)?;
    if data.is_empty() {
        return Err(Error::EmptyInput(format!(
            "no examples in {}",
            a.data.display()
        )));
    }
    let prepared = prepare_file(&data, &a.data, seg, &source, 0)?;
    let preds = predict(&bundle.model, &prepared)?;
    let pred_labels: Vec<usize> = preds.iter().map(|p| p.label).collect();
    let gold: Vec<usize> = data.iter().map(|e| e.label).collect();
    let report: MetricReport = if gold.iter().chain(&pred_labels).all(|&v| v <= 1) {
        binary_report(&pred_labels, &gold)?
    } else {
        let mut r = MetricReport::new();
        r.insert(
            "accuracy".into(),
            crate::metrics::accuracy(&pred_labels, &gold)?,
        );
        r
    };
    writeln!(
        out,
        "{}",
        serde_json::to_string(&report).map_err(|e| Error::Format(e.to_string()))?
    )?;
    if let Some(path) = &a.predictions {
        let mut w = create(path)?;
        for p in &pred_labels {
            writeln!(w, "{p}").map_err(|e| Error::from(e).in_file(path))?;
        }
        finish(w, path)?;
    }
    Ok(0)
}

fn gradcheck(a: GradcheckArgs, out: &mut dyn Write) -> Result<i32> {
    if a.d == 0 || a.r == 0 || a.l == 0 || a.k.is_multiple_of(2) {
        return Err(Error::Argument(
            "need positive --d, --r, --l and odd --k".into(),
        ));
    }
    let dims = GradCheckDims {
        d: a.d,
        r: a.r,
        l: a.l,
        k: a.k,
        variant: a.variant,
    };
    let report = grad_check(dims, a.seed, a.eps, a.tol)?;
    writeln!(out, "max_rel_error\t{:e}", report.max_rel_error)?;
    writeln!(out, "max_abs_error\t{:e}", report.max_abs_error)?;
    writeln!(out, "worst\t{}", report.worst)?;
    writeln!(out, "checked\t{}", report.checked)?;
    writeln!(out, "{}", if report.passed { "PASS" } else { "FAIL" })?;
    Ok(if report.passed { 0 } else { 2 })
}

fn mcnemar(a: McnemarArgs, out: &mut dyn Write) -> Result<i32> {
    let result: McNemarResult = match (&a.gold, &a.a, &a.b, a.b_count, a.c_count) {
        (Some(g), Some(pa), Some(pb), _, _) => {
            let paired =
                PairedPredictions::new(read_labels(g)?, read_labels(pa)?, read_labels(pb)?)?;
            mcnemar_test(&paired)?
        }
        (_, _, _, Some(b), Some(c)) => mcnemar_from_counts(b, c),
        _ => {
            return Err(Error::Argument(
                "pass --gold, --a and --b, or --b-count and --c-count".into(),
            ))
        }
    };
    writeln!(
        out,
        "{}",
        serde_json::to_string(&result).map_err(|e| Error::Format(e.to_string()))?
    )?;
    Ok(0)
}
