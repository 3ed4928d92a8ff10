//! `affect`: synthesize EEG-like corpora, featurize them, train and
//! evaluate the classifier, and compare runs, all reproducible from the
//! seeds on the command line.

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use affect_core::corpus::CorpusError;
use affect_core::eval::EvalError;
use affect_core::nn::NnError;
use clap::{Args, Parser, Subcommand};

mod commands;
mod config;

/// EEG affect classification experiments, end to end.
#[derive(Debug, Parser)]
#[command(name = "affect", version)]
struct Cli {
    /// JSON config file; command-line flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Master seed. Synthesis and runs refuse to start without one.
    #[arg(long, global = true, value_name = "INT")]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Worker thread count (default: one per core).
    #[arg(long, global = true, value_name = "INT")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic labeled epoch set.
    Synth(SynthArgs),
    /// Turn an epoch set into classifier-ready spectrogram instances.
    Featurize(FeaturizeArgs),
    /// Train and evaluate with repeated K-fold cross validation.
    Run(RunArgs),
    /// Compare two run reports with a Welch t-test.
    Compare(CompareArgs),
    /// Check every layer's analytic gradients against finite differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Corpus geometry: deap, seed, dens, or custom.
    #[arg(long)]
    geometry: Option<String>,

    /// Channel count (custom geometry only).
    #[arg(long)]
    channels: Option<usize>,

    /// Samples per channel (custom geometry only).
    #[arg(long)]
    samples: Option<usize>,

    /// Sampling rate in Hz (custom geometry only).
    #[arg(long)]
    fs: Option<f64>,

    /// Number of classes: 2, 3, or 4.
    #[arg(long)]
    classes: Option<u8>,

    /// Epochs generated per class.
    #[arg(long)]
    per_class: Option<usize>,

    /// Oscillation-to-noise amplitude ratio.
    #[arg(long)]
    snr: Option<f64>,
}

/// Featurization flags shared by `featurize` and `run`.
#[derive(Debug, Args)]
struct FeatureFlags {
    /// Label scheme: va4 or valence3 (default: the set's own scheme).
    #[arg(long)]
    scheme: Option<String>,

    /// STFT frame size in samples (default: half the sampling rate).
    #[arg(long)]
    frame_size: Option<usize>,

    /// STFT hop in samples (default: a quarter of the sampling rate).
    #[arg(long)]
    hop: Option<usize>,

    /// STFT window: hann, hamming, or rectangular.
    #[arg(long)]
    window: Option<String>,

    /// Spectrogram scaling: raw, log, or log-min-max.
    #[arg(long)]
    scaling: Option<String>,

    /// Bandpass corners in Hz (default 1:40).
    #[arg(long, value_name = "LOW:HIGH", conflicts_with = "no_bandpass")]
    bandpass: Option<String>,

    /// Butterworth order of the bandpass (default 5).
    #[arg(long, value_name = "INT", conflicts_with = "no_bandpass")]
    bandpass_order: Option<usize>,

    /// Skip the bandpass stage entirely.
    #[arg(long)]
    no_bandpass: bool,
}

#[derive(Debug, Args)]
struct FeaturizeArgs {
    /// Epoch set directory.
    set: PathBuf,

    #[command(flatten)]
    features: FeatureFlags,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Epoch set directory.
    set: PathBuf,

    #[command(flatten)]
    features: FeatureFlags,

    /// Classifier variant: full or reduced.
    #[arg(long)]
    model: Option<String>,

    /// Filter counts for the two convolutions (reduced variant).
    #[arg(long, value_name = "A,B")]
    conv_filters: Option<String>,

    /// Unit counts for the two LSTM layers (reduced variant).
    #[arg(long, value_name = "A,B")]
    lstm_units: Option<String>,

    /// Dropout rate at every dropout site.
    #[arg(long)]
    dropout: Option<f64>,

    /// Place the max-pool between the convolutions instead of after both.
    #[arg(long)]
    pool_between_convs: bool,

    /// Adam learning rate.
    #[arg(long)]
    learning_rate: Option<f64>,

    /// Minibatch size.
    #[arg(long)]
    batch_size: Option<usize>,

    /// Upper bound on training epochs per trial.
    #[arg(long)]
    max_epochs: Option<usize>,

    /// Epochs without validation improvement before early stop.
    #[arg(long)]
    patience: Option<usize>,

    /// Fraction of each training split held out for validation.
    #[arg(long)]
    val_fraction: Option<f64>,

    /// Folds per repeat.
    #[arg(long)]
    k: Option<usize>,

    /// Repeats of the K-fold protocol.
    #[arg(long)]
    repeats: Option<usize>,
}

#[derive(Debug, Args)]
struct CompareArgs {
    /// First run report (directory or report.json).
    report_a: PathBuf,

    /// Second run report.
    report_b: PathBuf,
}

#[derive(Debug, Args)]
struct GradcheckArgs {
    /// Corrupt one layer's backward pass to prove the check catches it:
    /// conv2d, lstm, or dense.
    #[arg(long, value_name = "LAYER")]
    inject_fault: Option<String>,
}

/// Failed command plus which exit code class it belongs to: 2 for bad
/// configuration, 3 for bad or missing data, 4 for numeric trouble.
#[derive(Debug)]
enum Failure {
    Config(String),
    Data(String),
    Numeric(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Data(_) => 3,
            Failure::Numeric(_) => 4,
        }
    }

    fn data(e: impl fmt::Display) -> Self {
        Failure::Data(e.to_string())
    }

    /// Prefixes the message with what was being touched when it failed.
    fn context(self, what: impl fmt::Display) -> Self {
        match self {
            Failure::Config(m) => Failure::Config(format!("{what}: {m}")),
            Failure::Data(m) => Failure::Data(format!("{what}: {m}")),
            Failure::Numeric(m) => Failure::Numeric(format!("{what}: {m}")),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(m) | Failure::Data(m) | Failure::Numeric(m) => f.write_str(m),
        }
    }
}

fn from_corpus(e: CorpusError) -> Failure {
    match e {
        CorpusError::UnsupportedClassCount(_)
        | CorpusError::InvalidSnr(_)
        | CorpusError::EmptyClass => Failure::Config(e.to_string()),
        _ => Failure::Data(e.to_string()),
    }
}

fn from_eval(e: EvalError) -> Failure {
    match &e {
        EvalError::Nn(n) => match n {
            NnError::NonFinite { .. } => Failure::Numeric(e.to_string()),
            NnError::BadArchitecture(_) | NnError::BadConfig(_) => Failure::Config(e.to_string()),
            _ => Failure::Data(e.to_string()),
        },
        EvalError::Signal(_) | EvalError::BadFolds(_) | EvalError::BadClassCount(_) => {
            Failure::Config(e.to_string())
        }
        EvalError::ZeroVariance => Failure::Numeric(e.to_string()),
        _ => Failure::Data(e.to_string()),
    }
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    let file = config::load(cli.config.as_deref())?;
    if let Some(threads) = cli.threads.or(file.threads) {
        if threads == 0 {
            return Err(Failure::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Failure::Config(e.to_string()))?;
    }
    let seed = cli.seed.or(file.seed);
    let out = cli.out.clone().or_else(|| file.out.clone());

    match &cli.command {
        Command::Synth(args) => commands::synth(args, &file, seed, out),
        Command::Featurize(args) => commands::featurize(args, &file, out),
        Command::Run(args) => commands::run(args, &file, seed, out),
        Command::Compare(args) => commands::compare_runs(args, out),
        Command::Gradcheck(args) => commands::gradcheck(args),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {failure}");
            ExitCode::from(failure.code())
        }
    }
}
