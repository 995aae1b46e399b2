//! Command-line interface: `gen-toy`, `train`, `transform`, `visualize`, `eval`.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::atomic::write_atomic;
use crate::data::{
    generate_toy_corpus, load_checkpoint, load_corpus_pos_neg, load_corpus_tsv, save_checkpoint, Checkpoint,
    Corpus, Sentiment, TOPICS,
};
use crate::encoder::EncoderConfig;
use crate::error::{Error, Result};
use crate::numerics::Activation;
use crate::pca::write_pca_csv;
use crate::pipeline::{build_model, evaluate, train_all, Metrics, TrainPlan};
use crate::transfer::{visualize, TransferSettings, Transformer, TraverseCell};
use crate::traversal::{write_reports_csv, TraversalDefaults, DEFAULT_LAMBDA, DEFAULT_SET_SIZE};

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_FAILURE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "latent-sentiment", version, about = "Sentiment transfer by traversing a sentence encoder's feature space")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the synthetic movie/phone corpus as TSV.
    GenToy(GenToyArgs),
    /// Train encoder and decoder, then write a checkpoint.
    Train(TrainArgs),
    /// Transform sentences to the opposite sentiment.
    Transform(TransformArgs),
    /// Export PCA coordinates of example, original and traversed vectors.
    Visualize(VisualizeArgs),
    /// Score a checkpoint on a corpus split.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct GenToyArgs {
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Sentences per (topic, sentiment) cell.
    #[arg(long, default_value_t = 25, value_parser = clap::value_parser!(u64).range(1..))]
    pub n: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Clone)]
pub struct CorpusArgs {
    /// `sentence<TAB>label` file.
    #[arg(long, conflicts_with_all = ["pos", "neg"])]
    pub corpus: Option<PathBuf>,
    /// One positive sentence per line (with --neg).
    #[arg(long, requires = "neg")]
    pub pos: Option<PathBuf>,
    /// One negative sentence per line (with --pos).
    #[arg(long, requires = "pos")]
    pub neg: Option<PathBuf>,
}

impl CorpusArgs {
    fn check(&self) -> Result<()> {
        if self.corpus.is_none() && self.pos.is_none() {
            return Err(Error::Usage("a corpus is required: --corpus FILE or --pos FILE --neg FILE".into()));
        }
        Ok(())
    }

    fn load(&self) -> Result<Corpus> {
        self.check()?;
        match (&self.corpus, &self.pos, &self.neg) {
            (Some(c), _, _) => load_corpus_tsv(c),
            (None, Some(p), Some(n)) => load_corpus_pos_neg(p, n),
            _ => unreachable!("checked above"),
        }
    }
}

#[derive(Debug, Args, Clone)]
pub struct TraversalArgs {
    /// Budget-of-change weight; defaults to the value stored in the checkpoint.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Kernel bandwidth; defaults to the median heuristic.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Source and target set size.
    #[arg(long)]
    pub set_size: Option<usize>,
    /// Group reference vectors by gold label rather than predicted label.
    #[arg(long)]
    pub use_gold_labels: bool,
    /// Seed for subsampling the reference sets.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl TraversalArgs {
    fn settings(&self, stored: TraversalDefaults) -> TransferSettings {
        let mut s = TransferSettings::from_defaults(stored);
        if let Some(l) = self.lambda {
            s.lambda = l;
        }
        if self.sigma.is_some() {
            s.sigma = self.sigma;
        }
        if let Some(n) = self.set_size {
            s.set_size = n;
        }
        s.use_gold_labels = self.use_gold_labels;
        s.seed = self.seed;
        s
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ActivationArg {
    Relu,
    Tanh,
    Identity,
}

impl From<ActivationArg> for Activation {
    fn from(a: ActivationArg) -> Self {
        match a {
            ActivationArg::Relu => Activation::Relu,
            ActivationArg::Tanh => Activation::Tanh,
            ActivationArg::Identity => Activation::Identity,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Checkpoint to write.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Seed of the 90/10 train/test split; defaults to --seed.
    #[arg(long)]
    pub split_seed: Option<u64>,
    #[arg(long)]
    pub phase1_epochs: Option<usize>,
    #[arg(long)]
    pub phase2_epochs: Option<usize>,
    #[arg(long)]
    pub retrain_epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long, default_value_t = 16)]
    pub embed_dim: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [1, 2, 3, 4])]
    pub filter_heights: Vec<usize>,
    #[arg(long, default_value_t = 8)]
    pub filters_per_height: usize,
    #[arg(long, value_enum, default_value_t = ActivationArg::Relu)]
    pub activation: ActivationArg,
    #[arg(long, default_value_t = 30)]
    pub max_len: usize,
    /// Word vectors in text format (`word v1 … vd`); random when absent.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Traversal λ stored in the checkpoint.
    #[arg(long, default_value_t = DEFAULT_LAMBDA)]
    pub lambda: f64,
    /// Kernel bandwidth stored in the checkpoint; median heuristic when absent.
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_SET_SIZE)]
    pub set_size: usize,
}

impl TrainArgs {
    pub fn plan(&self) -> TrainPlan {
        let d = TrainPlan::default();
        TrainPlan {
            phase1_epochs: self.phase1_epochs.unwrap_or(d.phase1_epochs),
            phase2_epochs: self.phase2_epochs.unwrap_or(d.phase2_epochs),
            retrain_epochs: self.retrain_epochs.unwrap_or(d.retrain_epochs),
            batch_size: self.batch_size.unwrap_or(d.batch_size),
            learning_rate: self.learning_rate.unwrap_or(d.learning_rate),
            seed: self.seed,
            ..d
        }
    }

    pub fn encoder_config(&self) -> EncoderConfig {
        EncoderConfig {
            embed_dim: self.embed_dim,
            filter_heights: self.filter_heights.clone(),
            filters_per_height: self.filters_per_height,
            activation: self.activation.into(),
            num_classes: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Direction {
    Pos,
    Neg,
}

impl From<Direction> for Sentiment {
    fn from(d: Direction) -> Self {
        match d {
            Direction::Pos => Sentiment::Positive,
            Direction::Neg => Sentiment::Negative,
        }
    }
}

#[derive(Debug, Args)]
pub struct TransformArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Corpus the model was trained on; its training split supplies the
    /// source and target vectors.
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Sentence to transform; repeatable.
    #[arg(long = "sentence")]
    pub sentences: Vec<String>,
    /// File with one sentence per line.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Target sentiment; by default the predicted sentiment is flipped.
    #[arg(long, value_enum)]
    pub to: Option<Direction>,
    #[command(flatten)]
    pub traversal: TraversalArgs,
    /// Write the transformed lines here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// CSV of per-sentence traversal diagnostics.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VisualizeArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Keep sentences containing one of these words.
    #[arg(long, value_delimiter = ',', default_values_t = TOPICS.map(String::from))]
    pub topics: Vec<String>,
    /// Cells to traverse as `label:topic`.
    #[arg(long, value_delimiter = ',', default_values_t = ["neg:movie".to_string(), "pos:phone".to_string()])]
    pub traverse: Vec<String>,
    #[command(flatten)]
    pub traversal: TraversalArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SplitArg {
    Train,
    Test,
    All,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long, value_enum, default_value_t = SplitArg::Test)]
    pub split: SplitArg,
}

/// Maps an error to the process exit code.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Usage(_) | Error::Input(_) => EXIT_USAGE,
        Error::Io(_) | Error::Csv(_) | Error::Format(_) => EXIT_IO,
        Error::Training { .. }
        | Error::Optimization { .. }
        | Error::Shape(_)
        | Error::Index { .. }
        | Error::Degenerate(_) => EXIT_FAILURE,
    }
}

/// Parses `args`, runs the command and returns the exit code. Results go to
/// `out`, provenance and diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = if code == 0 { write!(out, "{e}") } else { write!(err, "{e}") };
            return code;
        }
    };
    match execute(cli.command, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

pub fn execute(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    match command {
        Command::GenToy(a) => cmd_gen_toy(a.seed, a.n as usize, &a.out, out),
        Command::Train(a) => cmd_train(&a, out, err),
        Command::Transform(a) => cmd_transform(&a, out, err),
        Command::Visualize(a) => cmd_visualize(&a, out, err),
        Command::Eval(a) => cmd_eval(&a, out),
    }
}

pub fn cmd_gen_toy(seed: u64, n: usize, path: &Path, out: &mut dyn Write) -> Result<()> {
    if n == 0 {
        return Err(Error::Usage("--n must be at least 1".into()));
    }
    let corpus = generate_toy_corpus(seed, n);
    let tsv = corpus.to_tsv();
    write_atomic(path, |w| Ok(w.write_all(tsv.as_bytes())?))?;
    writeln!(
        out,
        "wrote {} sentences ({} positive, {} negative) to {}",
        corpus.len(),
        corpus.count(Sentiment::Positive),
        corpus.count(Sentiment::Negative),
        path.display()
    )?;
    Ok(())
}

fn print_metrics(out: &mut dyn Write, name: &str, m: &Metrics) -> Result<()> {
    writeln!(
        out,
        "{name}: examples {} accuracy {:.4} recon-token-accuracy {:.4} recon-loss {:.6} class-loss {:.6}",
        m.examples,
        m.classification_accuracy,
        m.reconstruction_token_accuracy,
        m.reconstruction_loss,
        m.classification_loss
    )?;
    Ok(())
}

pub fn cmd_train(args: &TrainArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    args.corpus.check()?;
    let plan = args.plan();
    plan.validate()?;
    let encoder_config = args.encoder_config();
    encoder_config.validate()?;
    if let Some(s) = args.sigma {
        crate::kernels::KernelConfig::new(s)?;
    }
    let split_seed = args.split_seed.unwrap_or(args.seed);
    writeln!(
        err,
        "config: seed {} split-seed {split_seed} phase1 {} phase2 {} retrain {} batch {} lr {} max-len {} embed {} heights {:?}x{} lambda {} set-size {} sigma {}",
        plan.seed,
        plan.phase1_epochs,
        plan.phase2_epochs,
        plan.retrain_epochs,
        plan.batch_size,
        plan.learning_rate,
        args.max_len,
        encoder_config.embed_dim,
        encoder_config.filter_heights,
        encoder_config.filters_per_height,
        args.lambda,
        args.set_size,
        args.sigma.map_or("median-heuristic".to_string(), |s| s.to_string()),
    )?;

    let corpus = args.corpus.load()?;
    let (train, test) = corpus.split(split_seed);
    writeln!(err, "corpus: {} train, {} test", train.len(), test.len())?;
    let mut model = build_model(&train, encoder_config, args.max_len, args.embeddings.as_deref(), args.seed)?;
    let mut progress_err = None;
    let outcome = train_all(&mut model, &train, &test, &plan, split_seed, &mut |e| {
        if let Err(io) = writeln!(out, "{e}") {
            progress_err.get_or_insert(io);
        }
    })?;
    if let Some(e) = progress_err {
        return Err(e.into());
    }
    let checkpoint = Checkpoint {
        model,
        traversal: TraversalDefaults {
            lambda: args.lambda,
            sigma: args.sigma,
            set_size: args.set_size,
        },
        meta: outcome.meta,
    };
    save_checkpoint(&args.out, &checkpoint)?;
    print_metrics(out, "train", &outcome.train_metrics)?;
    print_metrics(out, "test", &outcome.test_metrics)?;
    writeln!(out, "wrote checkpoint {}", args.out.display())?;
    Ok(())
}

fn load_for_inference(checkpoint: &Path, corpus: &CorpusArgs) -> Result<(Checkpoint, Corpus, Corpus)> {
    corpus.check()?;
    let ckpt = load_checkpoint(checkpoint)?;
    let corpus = corpus.load()?;
    let (train, test) = corpus.split(ckpt.meta.split_seed);
    Ok((ckpt, train, test))
}

fn print_settings(err: &mut dyn Write, s: &TransferSettings, t: &Transformer<'_>) -> Result<()> {
    let sigma = |from: Sentiment| t.sigma(from).map_or("-".to_string(), |v| format!("{v:.6}"));
    writeln!(
        err,
        "traversal: lambda {} set-size {} sigma neg->pos {} pos->neg {} labels {}",
        s.lambda,
        s.set_size,
        sigma(Sentiment::Negative),
        sigma(Sentiment::Positive),
        if s.use_gold_labels { "gold" } else { "predicted" }
    )?;
    Ok(())
}

pub fn cmd_transform(args: &TransformArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    if args.sentences.is_empty() && args.input.is_none() {
        return Err(Error::Usage("give --sentence TEXT or --input FILE".into()));
    }
    let (ckpt, train, _) = load_for_inference(&args.checkpoint, &args.corpus)?;
    let mut sentences = args.sentences.clone();
    if let Some(path) = &args.input {
        let text = std::fs::read_to_string(path)?;
        sentences.extend(text.lines().filter(|l| !l.trim().is_empty()).map(str::to_string));
    }
    let mut settings = args.traversal.settings(ckpt.traversal);
    settings.direction = args.to.map(Sentiment::from);
    let transformer = Transformer::new(&ckpt.model, &train, settings.clone())?;
    print_settings(err, &settings, &transformer)?;

    let mut text = String::new();
    let mut reports = Vec::with_capacity(sentences.len());
    for s in &sentences {
        let t = transformer.transform(s)?;
        text.push_str(&format!("original: {}\n", t.original));
        text.push_str(&format!("regenerated (z): {}\n", t.reconstruction));
        text.push_str(&format!("transformed (z*) {}->{}: {}\n", t.from.short_name(), t.to.short_name(), t.transformed));
        text.push_str(&format!("report: {}\n", t.report));
        reports.push(t.report);
    }
    if let Some(path) = &args.report {
        write_atomic(path, |w| write_reports_csv(w, &reports))?;
    }
    match &args.out {
        Some(path) => write_atomic(path, |w| Ok(w.write_all(text.as_bytes())?))?,
        None => out.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn parse_cell(s: &str) -> Result<TraverseCell> {
    let (label, topic) = s
        .split_once(':')
        .ok_or_else(|| Error::Usage(format!("--traverse expects label:topic, got {s:?}")))?;
    let label = Sentiment::parse(label).ok_or_else(|| Error::Usage(format!("unknown sentiment {label:?}")))?;
    Ok(TraverseCell {
        label,
        topic: topic.to_string(),
    })
}

pub fn cmd_visualize(args: &VisualizeArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let cells = args.traverse.iter().map(|c| parse_cell(c)).collect::<Result<Vec<_>>>()?;
    let topics: Vec<&str> = args.topics.iter().map(String::as_str).collect();
    if topics.is_empty() {
        return Err(Error::Usage("--topics must name at least one word".into()));
    }
    let (ckpt, train, _) = load_for_inference(&args.checkpoint, &args.corpus)?;
    let settings = args.traversal.settings(ckpt.traversal);
    let transformer = Transformer::new(&ckpt.model, &train, settings.clone())?;
    print_settings(err, &settings, &transformer)?;
    let rows = visualize(&ckpt.model, &train, &topics, &cells, &transformer)?;
    write_atomic(&args.out, |w| write_pca_csv(w, &rows))?;
    writeln!(out, "wrote {} rows to {}", rows.len(), args.out.display())?;
    Ok(())
}

pub fn cmd_eval(args: &EvalArgs, out: &mut dyn Write) -> Result<()> {
    let (ckpt, train, test) = load_for_inference(&args.checkpoint, &args.corpus)?;
    let (name, corpus) = match args.split {
        SplitArg::Train => ("train", train),
        SplitArg::Test => ("test", test),
        SplitArg::All => {
            let mut all = train;
            all.examples.extend(test.examples);
            ("all", all)
        }
    };
    let metrics = evaluate(&ckpt.model, &corpus)?;
    print_metrics(out, name, &metrics)
}
