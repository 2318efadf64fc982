//! `vidsme` command-line front end: statistics → scores → evaluation, plus
//! synthetic-data and corruption utilities.
//!
//! Exit status: 0 on success, 1 when a pipeline stage fails, 2 on usage
//! errors (bad flags, bad config, missing required options).

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// A problem with how the tool was invoked rather than with the data.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Debug, Parser)]
#[command(name = "vidsme", version, about = "Membership-inference auditing for video language models")]
pub struct Cli {
    /// TOML file with defaults for any flag; flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Worker threads for per-sample stages.
    #[arg(long, global = true, env = "VIDSME_THREADS", value_name = "N")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Motion and illumination statistics and adapted (q, r) per video.
    Stats(StatsArgs),
    /// Membership scores for every sample and attack.
    Score(ScoreArgs),
    /// ROC metrics from a scores file.
    Eval(EvalArgs),
    /// stats, score and eval in one run.
    Pipeline(PipelineArgs),
    /// Write a synthetic dataset: frames, dumps and manifest.
    Synth(SynthArgs),
    /// Apply a brightness or motion-blur corruption to frames.
    Corrupt(CorruptArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Stats(_) => "stats",
            Command::Score(_) => "score",
            Command::Eval(_) => "eval",
            Command::Pipeline(_) => "pipeline",
            Command::Synth(_) => "synth",
            Command::Corrupt(_) => "corrupt",
        }
    }
}

#[derive(Debug, Args)]
pub struct StatsOpts {
    /// Frames sampled per video [default: 16].
    #[arg(long)]
    pub frames: Option<usize>,
    /// Range of the order parameter q ∈ [1, 1 + beta1] [default: 1.0].
    #[arg(long)]
    pub beta1: Option<f64>,
    /// Range of the degree parameter r ∈ [1, 1 + beta2] [default: 0.1].
    #[arg(long)]
    pub beta2: Option<f64>,
}

#[derive(Debug, Args)]
pub struct AttackOpts {
    /// Attack method; repeat or comma-separate [default: all].
    #[arg(long, value_delimiter = ',')]
    pub method: Vec<String>,
    /// K percentages for K-parameterized methods [default: 0,5,30,60,90,100].
    #[arg(long, value_delimiter = ',')]
    pub k: Vec<f64>,
    /// Rényi orders; `inf` allowed [default: per method].
    #[arg(long, value_delimiter = ',')]
    pub alpha: Vec<String>,
    /// Score baselines on every natural-run position instead of the video span.
    #[arg(long)]
    pub full_span: bool,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[command(flatten)]
    pub stats: StatsOpts,
    /// Statistics JSON to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Statistics JSON from `stats`; without it every sample uses the
    /// centre of the adaptation range.
    #[arg(long)]
    pub stats: Option<PathBuf>,
    #[command(flatten)]
    pub attacks: AttackOpts,
    /// Scores CSV to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Scores CSV from `score`.
    #[arg(long)]
    pub scores: Option<PathBuf>,
    /// FPR caps for TPR@FPR; repeat or comma-separate [default: 0.05].
    #[arg(long, value_delimiter = ',')]
    pub fpr_cap: Vec<f64>,
    /// Report JSON to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// ROC points CSV [default: <out stem>.roc.csv].
    #[arg(long)]
    pub roc: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[command(flatten)]
    pub stats: StatsOpts,
    #[command(flatten)]
    pub attacks: AttackOpts,
    #[arg(long, value_delimiter = ',')]
    pub fpr_cap: Vec<f64>,
    /// Report JSON to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// [default: <out stem>.stats.json]
    #[arg(long)]
    pub stats_out: Option<PathBuf>,
    /// [default: <out stem>.scores.csv]
    #[arg(long)]
    pub scores_out: Option<PathBuf>,
    /// [default: <out stem>.roc.csv]
    #[arg(long)]
    pub roc: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// TOML profile; omitted keys take their defaults.
    #[arg(long)]
    pub profile: Option<PathBuf>,
    /// Overrides the profile seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write the zero-signal counterpart of the profile.
    #[arg(long)]
    pub null: bool,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CorruptArgs {
    /// A single directory of frames.
    #[arg(long, conflicts_with = "manifest")]
    pub frames_dir: Option<PathBuf>,
    /// Corrupt the frames of every record; writes a manifest beside them.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// `brightness` or `motion_blur`.
    #[arg(long)]
    pub kind: Option<String>,
    /// `marginal`, `moderate` or `severe`.
    #[arg(long)]
    pub level: Option<String>,
    /// Seeds the brightness direction [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    // clap exits with status 2 on malformed arguments
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
