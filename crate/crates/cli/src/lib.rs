//! `redrep` command-line interface.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

pub mod commands;
pub mod config;

pub use commands::{dataset_expectations, run_ablation, AblationReport};
pub use config::Settings;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "redrep", version, about = "Reduplication and repetition tagging experiments")]
pub struct Cli {
    /// `key = value` config file; defaults to $REDREP_CONFIG
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic labeled corpus
    Synth(SynthCmd),
    /// Split a corpus into train/dev/test
    Split(SplitCmd),
    /// Train a model
    Train(TrainCmd),
    /// Tag a corpus with a trained model
    Predict(PredictCmd),
    /// Evaluate a model, a prediction file, or repeated training runs
    Eval(EvalCmd),
    /// Fleiss' kappa of a ratings table
    Kappa(KappaCmd),
    /// Compare corpus counts with the IndicRedRep dataset statistics
    VerifyStats(VerifyCmd),
    /// List detected duplication spans
    InspectSpans(InspectCmd),
    /// Train with and without span features and compare
    Ablation(AblationCmd),
}

type Flags = Vec<(&'static str, Option<String>)>;

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// number of sentences
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    min_len: Option<String>,
    #[arg(long)]
    max_len: Option<String>,
    #[arg(long)]
    p_redup: Option<String>,
    #[arg(long)]
    p_rep: Option<String>,
    #[arg(long)]
    p_other: Option<String>,
    #[arg(long)]
    p_interregnum: Option<String>,
    #[arg(long)]
    p_confusion: Option<String>,
    #[arg(long)]
    language: Option<String>,
    #[arg(long)]
    lexicon_general: Option<String>,
    #[arg(long)]
    lexicon_reduplicable: Option<String>,
    #[arg(long)]
    lexicon_interregnum: Option<String>,
    #[arg(long)]
    lexicon_other: Option<String>,
}

impl SynthArgs {
    fn flags(&self, f: &mut Flags) {
        f.extend([
            ("synth.n", self.n.clone()),
            ("synth.min_len", self.min_len.clone()),
            ("synth.max_len", self.max_len.clone()),
            ("synth.p_redup", self.p_redup.clone()),
            ("synth.p_rep", self.p_rep.clone()),
            ("synth.p_other", self.p_other.clone()),
            ("synth.p_interregnum", self.p_interregnum.clone()),
            ("synth.p_confusion", self.p_confusion.clone()),
            ("synth.language", self.language.clone()),
            ("synth.lexicon.general", self.lexicon_general.clone()),
            ("synth.lexicon.reduplicable", self.lexicon_reduplicable.clone()),
            ("synth.lexicon.interregnum", self.lexicon_interregnum.clone()),
            ("synth.lexicon.other", self.lexicon_other.clone()),
        ]);
    }
}

#[derive(Debug, Args)]
pub struct RirArgs {
    #[arg(long)]
    max_interregnum_len: Option<String>,
    #[arg(long)]
    max_phrase_len: Option<String>,
    /// normalized or surface
    #[arg(long)]
    match_on: Option<String>,
}

impl RirArgs {
    fn flags(&self, f: &mut Flags) {
        f.extend([
            ("rir.max_interregnum_len", self.max_interregnum_len.clone()),
            ("rir.max_phrase_len", self.max_phrase_len.clone()),
            ("rir.match_on", self.match_on.clone()),
        ]);
    }
}

#[derive(Debug, Args)]
pub struct FeatureArgs {
    /// comma-separated template names
    #[arg(long)]
    templates: Option<String>,
    /// on or off: add the RIR_* templates
    #[arg(long)]
    rir: Option<String>,
    #[arg(long)]
    min_count: Option<String>,
}

impl FeatureArgs {
    fn flags(&self, f: &mut Flags) {
        f.extend([
            ("features.templates", self.templates.clone()),
            ("features.rir", self.rir.clone()),
            ("features.min_count", self.min_count.clone()),
        ]);
    }
}

#[derive(Debug, Args)]
pub struct OptimArgs {
    #[arg(long)]
    epochs: Option<String>,
    #[arg(long)]
    batch_size: Option<String>,
    #[arg(long)]
    learning_rate: Option<String>,
    #[arg(long)]
    l2: Option<String>,
    /// on or off
    #[arg(long)]
    shuffle: Option<String>,
}

impl OptimArgs {
    fn flags(&self, f: &mut Flags) {
        f.extend([
            ("train.epochs", self.epochs.clone()),
            ("train.batch_size", self.batch_size.clone()),
            ("train.learning_rate", self.learning_rate.clone()),
            ("train.l2", self.l2.clone()),
            ("train.shuffle", self.shuffle.clone()),
        ]);
    }
}

#[derive(Debug, Args)]
pub struct SynthCmd {
    #[arg(long)]
    seed: Option<String>,
    /// output CoNLL file
    #[arg(long)]
    out: Option<String>,
    /// optional injection trace file
    #[arg(long)]
    trace: Option<String>,
    #[command(flatten)]
    synth: SynthArgs,
}

#[derive(Debug, Args)]
pub struct SplitCmd {
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    input: Option<String>,
    /// train,dev,test ratios, e.g. 0.8,0.1,0.1
    #[arg(long)]
    ratios: Option<String>,
    /// on or off
    #[arg(long)]
    stratify: Option<String>,
    /// directory for train.conll, dev.conll and test.conll
    #[arg(long)]
    out_dir: Option<String>,
}

#[derive(Debug, Args)]
pub struct TrainCmd {
    #[arg(long)]
    seed: Option<String>,
    /// crf or logreg
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    train: Option<String>,
    /// output model file
    #[arg(long)]
    out: Option<String>,
    #[command(flatten)]
    features: FeatureArgs,
    #[command(flatten)]
    rir_args: RirArgs,
    #[command(flatten)]
    optim: OptimArgs,
}

#[derive(Debug, Args)]
pub struct PredictCmd {
    /// model file
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    input: Option<String>,
    /// output CoNLL file; standard output when absent
    #[arg(long)]
    out: Option<String>,
}

#[derive(Debug, Args)]
pub struct EvalCmd {
    #[arg(long)]
    seed: Option<String>,
    /// model file
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    test: Option<String>,
    /// gold CoNLL file, compared against --pred
    #[arg(long)]
    gold: Option<String>,
    #[arg(long)]
    pred: Option<String>,
    /// train a fresh model per run instead of loading --model
    #[arg(long)]
    train: Option<String>,
    /// model kind for --train: crf or logreg
    #[arg(long)]
    kind: Option<String>,
    #[arg(long)]
    runs: Option<String>,
    /// JSON report file
    #[arg(long)]
    report: Option<String>,
    #[command(flatten)]
    features: FeatureArgs,
    #[command(flatten)]
    rir_args: RirArgs,
    #[command(flatten)]
    optim: OptimArgs,
}

#[derive(Debug, Args)]
pub struct KappaCmd {
    /// one item per line: rater labels, or per-category counts
    #[arg(long)]
    input: Option<String>,
    #[arg(long)]
    report: Option<String>,
}

#[derive(Debug, Args)]
pub struct VerifyCmd {
    /// corpus file; repeat for several files
    #[arg(long)]
    input: Vec<String>,
    /// language for sentences without a `# lang` line
    #[arg(long)]
    language: Option<String>,
    /// train, validation, test or all
    #[arg(long)]
    split: Option<String>,
}

#[derive(Debug, Args)]
pub struct InspectCmd {
    #[arg(long)]
    input: Option<String>,
    /// editing-term word list reported alongside the heuristic
    #[arg(long)]
    lexicon: Option<String>,
    #[command(flatten)]
    rir_args: RirArgs,
}

#[derive(Debug, Args)]
pub struct AblationCmd {
    #[arg(long)]
    seed: Option<String>,
    /// crf or logreg
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    train: Option<String>,
    #[arg(long)]
    test: Option<String>,
    #[arg(long)]
    runs: Option<String>,
    #[arg(long)]
    report: Option<String>,
    #[command(flatten)]
    features: FeatureArgs,
    #[command(flatten)]
    rir_args: RirArgs,
    #[command(flatten)]
    optim: OptimArgs,
}

impl Command {
    fn flags(&self) -> Flags {
        let mut f = Flags::new();
        match self {
            Command::Synth(c) => {
                f.extend([("seed", c.seed.clone()), ("paths.out", c.out.clone()), ("paths.trace", c.trace.clone())]);
                c.synth.flags(&mut f);
            }
            Command::Split(c) => f.extend([
                ("seed", c.seed.clone()),
                ("paths.input", c.input.clone()),
                ("split.ratios", c.ratios.clone()),
                ("split.stratify", c.stratify.clone()),
                ("paths.out_dir", c.out_dir.clone()),
            ]),
            Command::Train(c) => {
                f.extend([
                    ("seed", c.seed.clone()),
                    ("train.model", c.model.clone()),
                    ("paths.train", c.train.clone()),
                    ("paths.out", c.out.clone()),
                ]);
                c.features.flags(&mut f);
                c.rir_args.flags(&mut f);
                c.optim.flags(&mut f);
            }
            Command::Predict(c) => f.extend([
                ("paths.model", c.model.clone()),
                ("paths.input", c.input.clone()),
                ("paths.out", c.out.clone()),
            ]),
            Command::Eval(c) => {
                f.extend([
                    ("seed", c.seed.clone()),
                    ("paths.model", c.model.clone()),
                    ("paths.test", c.test.clone()),
                    ("paths.gold", c.gold.clone()),
                    ("paths.pred", c.pred.clone()),
                    ("paths.train", c.train.clone()),
                    ("train.model", c.kind.clone()),
                    ("eval.runs", c.runs.clone()),
                    ("paths.report", c.report.clone()),
                ]);
                c.features.flags(&mut f);
                c.rir_args.flags(&mut f);
                c.optim.flags(&mut f);
            }
            Command::Kappa(c) => f.extend([("paths.input", c.input.clone()), ("paths.report", c.report.clone())]),
            Command::VerifyStats(c) => f.extend([
                ("paths.input", (!c.input.is_empty()).then(|| c.input.join(","))),
                ("verify.language", c.language.clone()),
                ("verify.split", c.split.clone()),
            ]),
            Command::InspectSpans(c) => {
                f.extend([("paths.input", c.input.clone()), ("paths.lexicon", c.lexicon.clone())]);
                c.rir_args.flags(&mut f);
            }
            Command::Ablation(c) => {
                f.extend([
                    ("seed", c.seed.clone()),
                    ("train.model", c.model.clone()),
                    ("paths.train", c.train.clone()),
                    ("paths.test", c.test.clone()),
                    ("eval.runs", c.runs.clone()),
                    ("paths.report", c.report.clone()),
                ]);
                c.features.flags(&mut f);
                c.rir_args.flags(&mut f);
                c.optim.flags(&mut f);
            }
        }
        f
    }
}

fn one_line(msg: &str) -> String {
    msg.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// exit code. Human-readable output goes to standard output; the only thing
/// written to standard error is a one-line diagnostic on failure.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let rendered = e.to_string();
            let first = rendered.lines().next().unwrap_or("invalid arguments");
            eprintln!("redrep: {}", one_line(first.trim_start_matches("error: ")));
            return 1;
        }
    };
    let stdout = std::io::stdout();
    let result = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| {
        let mut out = stdout.lock();
        let result = execute(&cli, &mut out);
        let _ = out.flush();
        result
    }));
    let err = match result {
        Ok(Ok(())) => return 0,
        Ok(Err(e)) => e,
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            CliError::Internal(format!("internal error: {msg}"))
        }
    };
    eprintln!("redrep: {}", one_line(&err.to_string()));
    err.exit_code()
}

/// Runs an already-parsed command, writing human-readable output to `out`.
pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let settings = Settings::load(cli.config.as_deref(), cli.command.flags())?;
    match &cli.command {
        Command::Synth(_) => commands::synth(&settings, out),
        Command::Split(_) => commands::split(&settings, out),
        Command::Train(_) => commands::train(&settings, out),
        Command::Predict(_) => commands::predict(&settings, out),
        Command::Eval(_) => commands::eval(&settings, out),
        Command::Kappa(_) => commands::kappa(&settings, out),
        Command::VerifyStats(_) => commands::verify_stats(&settings, out),
        Command::InspectSpans(_) => commands::inspect_spans(&settings, out),
        Command::Ablation(_) => commands::ablation(&settings, out),
    }
}
