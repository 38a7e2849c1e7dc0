use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ksconf::ThresholdSource;
use ksconf::calibration::{DEFAULT_COMPRESSION, DEFAULT_JITTER_EPS};
use ksconf::baselines::DEFAULT_RESAMPLES;

#[derive(Debug, Parser)]
#[command(name = "ksconf", version, about = "Detect out-of-specs operation of a classifier from its confidences")]
pub struct Cli {
    /// Where to write the run manifest (default: next to the output, else stderr).
    #[arg(long, global = true, value_name = "PATH")]
    pub manifest: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a reference model from within-specs scores.
    Calibrate(CalibrateArgs),
    /// Test consecutive windows of a score stream against a model.
    Test(TestArgs),
    /// Pick a small enriched subset of a positive batch.
    Filter(FilterArgs),
    /// Run the evaluation protocols described by a TOML config.
    Eval(EvalArgs),
    /// Show the tabulated and approximate KS thresholds.
    Thresholds(ThresholdsArgs),
    /// Re-run a command from its manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Jsonl,
}

impl From<FormatArg> for ksconf::ingest::Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => ksconf::ingest::Format::Csv,
            FormatArg::Jsonl => ksconf::ingest::Format::JsonLines,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Family {
    KsConf,
    MeanTest,
    LabelFrequency,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WindowPolicy {
    /// Non-overlapping windows of exactly `--batch-size` rows.
    Consecutive,
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Score file (`-` for standard input).
    #[arg(default_value = "-")]
    pub input: String,

    /// Input format; guessed from the extension, CSV otherwise.
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[command(flatten)]
    pub input: InputArgs,

    #[arg(short, long)]
    pub output: PathBuf,

    #[arg(long, value_enum, default_value = "ks-conf")]
    pub family: Family,

    #[arg(long, default_value_t = DEFAULT_JITTER_EPS)]
    pub jitter_eps: f64,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Stream the input through a quantile sketch instead of keeping it.
    #[arg(long)]
    pub sketch: bool,

    #[arg(long, default_value_t = DEFAULT_COMPRESSION)]
    pub compression: f64,

    /// Breakpoints extracted from the sketch (default: min(rows, 10000)).
    #[arg(long)]
    pub breakpoints: Option<usize>,

    /// Creation stamp stored in the model; omitted unless given.
    #[arg(long)]
    pub created: Option<String>,

    /// Mean-test family: work on log confidences.
    #[arg(long)]
    pub log_space: bool,

    /// Mean-test family: significance levels to resample thresholds for.
    #[arg(long, value_delimiter = ',')]
    pub bootstrap_alpha: Vec<f64>,

    /// Mean-test family: batch sizes to resample thresholds for.
    #[arg(long, value_delimiter = ',')]
    pub bootstrap_m: Vec<usize>,

    #[arg(long, default_value_t = DEFAULT_RESAMPLES)]
    pub resamples: usize,

    /// Label-frequency family: number of classes (default: largest label + 1).
    #[arg(long)]
    pub labels: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TestArgs {
    #[arg(long)]
    pub model: PathBuf,

    #[command(flatten)]
    pub input: InputArgs,

    #[arg(short = 'm', long)]
    pub batch_size: usize,

    #[arg(long, default_value_t = 0.01)]
    pub alpha: f64,

    #[arg(long, default_value = "auto")]
    pub threshold_source: ThresholdSource,

    #[arg(long, value_enum, default_value = "consecutive")]
    pub window_policy: WindowPolicy,

    /// Mean-test models: z, mean, sym-z or sym-mean (log- prefix optional).
    #[arg(long, default_value = "z")]
    pub variant: String,

    /// Output file (default: standard output).
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    #[arg(long)]
    pub model: PathBuf,

    #[command(flatten)]
    pub input: InputArgs,

    /// Subset size.
    #[arg(short, long)]
    pub w: usize,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    pub config: PathBuf,

    /// Report CSV (default: standard output).
    #[arg(short, long)]
    pub output: Option<PathBuf>,

    /// Also write the report in long format.
    #[arg(long)]
    pub long: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ThresholdsArgs {
    #[arg(long)]
    pub alpha: f64,

    #[arg(short = 'm', long)]
    pub batch_size: usize,

    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    pub manifest_file: PathBuf,

    /// Fail unless every output is reproduced byte for byte.
    #[arg(long)]
    pub check: bool,
}
