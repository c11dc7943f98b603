//! Command-line driver: `ingest`, `query`, `search`, `detect`, `score`, `plot`.
//!
//! Exit codes: 0 success, 2 usage error, 3 data error, 4 search error.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

mod commands;
pub mod files;

pub use commands::run;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Search(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Search(_) => 4,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "odsearch", version, about = "Automated outlier-detection pipeline search")]
pub struct Cli {
    /// Store root directory.
    #[arg(long, env = "ODSEARCH_STORE", global = true)]
    pub store: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Add a `timestamp,value` CSV (and optional labels JSON) to the store.
    Ingest(IngestArgs),
    /// Print or write a time range of a stored dataset.
    Query(QueryArgs),
    /// Search the pipeline space on a labeled dataset.
    Search(SearchArgs),
    /// Run one policy over a dataset and write per-point scores.
    Detect(DetectArgs),
    /// F1 and windowed scores of a detection CSV.
    Score(ScoreArgs),
    /// Render an SVG chart.
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub name: String,
    #[arg(long)]
    pub csv: PathBuf,
    /// `{"<name or .../file.csv>": [[start, end], ...]}`.
    #[arg(long)]
    pub labels: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    #[arg(long)]
    pub dataset: String,
    /// Inclusive start (epoch ms or date-time); defaults to the first point.
    #[arg(long)]
    pub start: Option<String>,
    /// Inclusive end; defaults to the last point.
    #[arg(long)]
    pub end: Option<String>,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    Guided,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    F1,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[arg(long)]
    pub dataset: String,
    /// Number of evaluated policies.
    #[arg(long, default_value_t = 50)]
    pub budget: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Fraction of points in the training segment.
    #[arg(long, default_value_t = 0.7)]
    pub split_ratio: f64,
    #[arg(long, value_enum, default_value_t = MetricArg::F1)]
    pub metric: MetricArg,
    /// JSONL trace, one line per trial.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Best policy as JSON.
    #[arg(long)]
    pub policy_out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = StrategyArg::Guided)]
    pub strategy: StrategyArg,
    /// Write wall-clock milliseconds into the trace (otherwise 0, keeping
    /// traces byte-identical across runs).
    #[arg(long)]
    pub record_timings: bool,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[arg(long)]
    pub dataset: String,
    #[arg(long)]
    pub policy: PathBuf,
    /// Scores CSV `timestamp,score,flag,raw_score`.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the policy's detector seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProfileArg {
    Standard,
    RewardLowFp,
    RewardLowFn,
    All,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Scores CSV as written by `detect`.
    #[arg(long)]
    pub scores: PathBuf,
    /// Stored dataset whose windows label the scores.
    #[arg(long, conflicts_with = "labels")]
    pub dataset: Option<String>,
    /// Labels JSON; windows are looked up under `--key`.
    #[arg(long, requires = "key")]
    pub labels: Option<PathBuf>,
    #[arg(long)]
    pub key: Option<String>,
    #[arg(long, value_enum, default_value_t = ProfileArg::All)]
    pub profile: ProfileArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlotKindArg {
    Overlay,
    Decomposition,
    Density,
    SearchProgress,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[arg(long, value_enum)]
    pub kind: PlotKindArg,
    /// Required for every kind except `search-progress`.
    #[arg(long)]
    pub dataset: Option<String>,
    /// Scores CSV (overlay).
    #[arg(long)]
    pub scores: Option<PathBuf>,
    /// Search trace (search-progress).
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Seasonal period in samples (decomposition).
    #[arg(long, default_value_t = 24)]
    pub period: usize,
    /// KDE bandwidth (density); Silverman's rule when absent.
    #[arg(long)]
    pub bandwidth: Option<f64>,
    #[arg(long)]
    pub title: Option<String>,
    #[arg(long, default_value_t = 900)]
    pub width: u32,
    #[arg(long)]
    pub height: Option<u32>,
    #[arg(long)]
    pub out: PathBuf,
}
