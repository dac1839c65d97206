use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "reqcast", version, about = "Forecast per-period Poisson request rates from cluster traces")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Aggregate a raw trace into per-period observation files.
    Ingest(IngestArgs),
    /// Fit the Poisson rate of every observed period.
    Fit(FitArgs),
    /// Run the cyclic-window forecaster over a train and test stream.
    Predict(PredictArgs),
    /// Score prediction records, or sweep a configuration grid.
    Evaluate(EvaluateArgs),
    /// Generate a seeded synthetic trace with known rates.
    Synth(SynthArgs),
}

/// Flags understood by every command. Each may also be set in the
/// `--config` file under the same name without the leading dashes.
#[derive(Debug, Clone, Default, Args)]
pub struct Shared {
    /// Target period length in minutes [default: 30]
    #[arg(long)]
    pub tp_min: Option<u64>,
    /// Target periods per pattern period [default: 336]
    #[arg(long)]
    pub pp_tps: Option<usize>,
    /// Target periods per utilization window [default: 50]
    #[arg(long)]
    pub up_tps: Option<usize>,
    /// Pattern periods kept in the store [default: 2]
    #[arg(long)]
    pub cycles: Option<usize>,
    /// epanechnikov, biweight or gaussian [default: epanechnikov]
    #[arg(long)]
    pub kernel: Option<String>,
    /// Bandwidth as a nearest-point count [default: 20]
    #[arg(long, conflicts_with = "bandwidth_h")]
    pub bandwidth_k: Option<usize>,
    /// Bandwidth as a fixed radius in target periods
    #[arg(long)]
    pub bandwidth_h: Option<f64>,
    /// arrivals, cpu or memory
    #[arg(long)]
    pub metric: Option<String>,
    /// Sub-bin width in seconds [default: 60]
    #[arg(long)]
    pub sub_bin_sec: Option<u64>,
    /// Multiplier applied to CPU and memory sums before rounding [default: 100]
    #[arg(long)]
    pub scale: Option<f64>,
    /// RNG seed [default: 1]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory [default: .]
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// key=value file with defaults for any flag
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Layout {
    /// timestamp,job_id,task_id,cpu_request,mem_request with a header
    Default,
    /// Headerless Google cluster-usage task_events columns
    Google,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[command(flatten)]
    pub shared: Shared,
    /// Trace file to read
    #[arg(long)]
    pub trace: PathBuf,
    #[arg(long, value_enum)]
    pub layout: Option<Layout>,
    /// Timestamp column, by 0-based index or header name
    #[arg(long)]
    pub col_ts: Option<String>,
    #[arg(long)]
    pub col_cpu: Option<String>,
    #[arg(long)]
    pub col_mem: Option<String>,
    /// Single-character field delimiter
    #[arg(long)]
    pub delimiter: Option<char>,
    /// Treat the first row as data
    #[arg(long)]
    pub no_header: bool,
    /// Trace time of the first target period, in microseconds [default: 0]
    #[arg(long)]
    pub start_us: Option<i64>,
    /// Number of target periods [default: enough to cover every event]
    #[arg(long)]
    pub tps: Option<usize>,
    /// Also write the first N periods and the rest as separate train and test files
    #[arg(long)]
    pub split_at: Option<usize>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub shared: Shared,
    /// Observation files written by `ingest`
    #[arg(long, required = true)]
    pub obs: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub shared: Shared,
    /// Observations that warm the store
    #[arg(long)]
    pub train: PathBuf,
    /// Observations that continue the train stream
    #[arg(long)]
    pub test: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BaselineKind {
    Naive,
    PoissonWindow,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub shared: Shared,
    /// Records file written by `predict`
    #[arg(long, conflicts_with_all = ["train", "test"], required_unless_present = "train")]
    pub records: Option<PathBuf>,
    /// First step scored when evaluating a records file [default: 1]
    #[arg(long, requires = "records")]
    pub test_from_t: Option<u64>,
    /// Train observations for a sweep
    #[arg(long, requires = "test")]
    pub train: Option<PathBuf>,
    /// Test observations for a sweep
    #[arg(long, requires = "train")]
    pub test: Option<PathBuf>,
    /// Utilization windows to sweep, comma separated
    #[arg(long, value_delimiter = ',')]
    pub up_grid: Vec<usize>,
    /// Nearest-point bandwidths to sweep, comma separated
    #[arg(long, value_delimiter = ',')]
    pub k_grid: Vec<usize>,
    /// Radius bandwidths to sweep, comma separated
    #[arg(long, value_delimiter = ',')]
    pub h_grid: Vec<f64>,
    /// Worker threads for a sweep [default: 1]
    #[arg(long)]
    pub threads: Option<usize>,
    /// Comparator to score on the same periods; repeatable
    #[arg(long, value_enum)]
    pub baseline: Vec<BaselineKind>,
    /// Window of the poisson-window comparator [default: 2]
    #[arg(long)]
    pub baseline_window: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub shared: Shared,
    /// Target periods to generate [default: three pattern periods]
    #[arg(long)]
    pub tps: Option<usize>,
    /// Target periods per day [default: 1440 / tp-min]
    #[arg(long)]
    pub tps_per_day: Option<usize>,
    /// Mean count per sub-bin before modulation [default: 5]
    #[arg(long)]
    pub base_lambda: Option<f64>,
    /// [default: 0.6]
    #[arg(long)]
    pub daily_amp: Option<f64>,
    /// [default: 0.3]
    #[arg(long)]
    pub weekly_amp: Option<f64>,
    /// Log-scale spread of the per-period noise factor [default: 0.1]
    #[arg(long)]
    pub noise_sigma: Option<f64>,
}
