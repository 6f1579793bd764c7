mod commands;
mod record;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use videosync_core::datagen::Injection;
use videosync_core::predictors::PredictorKind;

#[derive(Debug, Parser, Serialize)]
#[command(name = "videosync", version, about = "Frame-offset estimation between two videos of one scene")]
struct Cli {
    /// Format of what is printed to stdout.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Json,
    Text,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum InjectionArg {
    Fair,
    Leaky,
}

impl From<InjectionArg> for Injection {
    fn from(a: InjectionArg) -> Self {
        match a {
            InjectionArg::Fair => Injection::Fair,
            InjectionArg::Leaky => Injection::Leaky,
        }
    }
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Command {
    /// Generate a synthetic corpus of offset-labeled embedding pairs.
    Gen(GenArgs),
    /// Pixel-grid embeddings from a directory of PGM/PPM frames.
    Features(FeaturesArgs),
    /// Similarity matrix of two embedding sequences.
    Simmat(SimmatArgs),
    /// Train a learned predictor on a manifest.
    Train(TrainArgs),
    /// Predict the offset between two embedding sequences.
    Predict(PredictArgs),
    /// Score predictors on a manifest.
    Eval(EvalArgs),
    /// Leaky vs fair offset injection on noise-substituted, position-biased pairs.
    BiasExp(BiasArgs),
    /// Error as a function of clip duration.
    DurationSweep(SweepArgs),
}

#[derive(Debug, Args, Serialize)]
struct GenArgs {
    #[arg(long)]
    frames: usize,
    #[arg(long, default_value_t = 32)]
    dim: usize,
    #[arg(long)]
    pairs: usize,
    /// Std-dev of per-view observation noise.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0.0)]
    positional_weight: f64,
    #[arg(long, default_value_t = 1.0)]
    walk_sigma: f64,
    /// Use identity view maps with zero bias.
    #[arg(long)]
    identity_views: bool,
    #[arg(long, default_value_t = 0.0)]
    distractor_fraction: f64,
    #[arg(long, value_enum, default_value_t = InjectionArg::Fair)]
    injection: InjectionArg,
    #[arg(long, default_value_t = 30)]
    offset_bound: i64,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct FeaturesArgs {
    #[arg(long)]
    frames_dir: PathBuf,
    #[arg(long)]
    temporal_diff: bool,
    /// Sliding mean-pool window (1 = none).
    #[arg(long, default_value_t = 1)]
    window: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct SimmatArgs {
    #[arg(long)]
    v1: PathBuf,
    #[arg(long)]
    v2: PathBuf,
    #[arg(long)]
    softmax: bool,
    #[arg(long)]
    pad: Option<usize>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    pgm: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct TrainArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, value_parser = learned_kind)]
    predictor: PredictorKind,
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    #[arg(long, default_value_t = 16)]
    batch: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 0.01)]
    weight_decay: f64,
    #[arg(long, default_value_t = 256)]
    pad: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out_model: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct PredictArgs {
    #[arg(long)]
    v1: PathBuf,
    #[arg(long)]
    v2: PathBuf,
    #[arg(long, value_parser = any_kind)]
    predictor: PredictorKind,
    #[arg(long)]
    model: Option<PathBuf>,
    /// Replace offsets beyond ±30 with 0.
    #[arg(long)]
    adjust: bool,
}

#[derive(Debug, Args, Serialize)]
struct EvalArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, value_delimiter = ',', required = true, value_parser = any_kind)]
    predictors: Vec<PredictorKind>,
    /// Directory holding `<predictor>.vsmd` for each learned predictor.
    #[arg(long)]
    models: Option<PathBuf>,
    #[arg(long)]
    adjust: bool,
    /// Also render the first K raw similarity matrices as PGM.
    #[arg(long, default_value_t = 0)]
    pgm: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct BiasArgs {
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 200)]
    pairs: usize,
    #[arg(long, default_value_t = 4.0)]
    positional_weight: f64,
    #[arg(long, default_value_t = 120)]
    frames: usize,
    #[arg(long, default_value_t = 32)]
    dim: usize,
    #[arg(long, default_value_t = 0.1)]
    walk_sigma: f64,
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
    #[arg(long, default_value_t = 30)]
    offset_bound: i64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct SweepArgs {
    #[arg(long, value_delimiter = ',', default_value = "80,160,240,320,400,480")]
    durations: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    pairs: usize,
    #[arg(long, default_value_t = 1.0)]
    noise: f64,
    #[arg(long, default_value_t = 16)]
    dim: usize,
    #[arg(long, default_value_t = 30)]
    offset_bound: i64,
    #[arg(long, value_parser = any_kind, default_value = "argmax")]
    predictor: PredictorKind,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn any_kind(s: &str) -> Result<PredictorKind, String> {
    s.parse().map_err(|e: videosync_core::Error| e.to_string())
}

fn learned_kind(s: &str) -> Result<PredictorKind, String> {
    match any_kind(s)? {
        k if k.is_learned() => Ok(k),
        k => Err(format!("{k} is not trainable (expected logreg, svm, mlp or cnn)")),
    }
}

/// Usage errors exit with 2, runtime failures with 1.
#[derive(Debug)]
enum CliError {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Runtime(e)
    }
}

impl From<videosync_core::Error> for CliError {
    fn from(e: videosync_core::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

fn usage(msg: impl std::fmt::Display) -> CliError {
    CliError::Usage(msg.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
