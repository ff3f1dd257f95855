use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "emoinf", version, about = "Emotion influence in image-sharing social networks")]
pub struct Cli {
    /// Master seed; every random stream is derived from it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Upper bound on worker threads.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    /// Training and inference settings (JSON).
    #[arg(long, global = true, env = "EMOINF_CONFIG")]
    pub config: Option<PathBuf>,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract visual features from PPM images into image records.
    Extract(ExtractArgs),
    /// Learn per-category parameters.
    Train(TrainArgs),
    /// Infer image, user and influence probabilities with trained parameters.
    Predict(PredictArgs),
    /// Observation statistics and evaluation.
    Analyze {
        #[command(subcommand)]
        command: AnalyzeCommand,
    },
    /// Generate a synthetic network with planted parameters.
    Synth(SynthArgs),
    /// Write a user's ego network with influence edges as DOT.
    ExportDot(DotArgs),
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// Directory holding the PPM files.
    #[arg(long)]
    pub images: PathBuf,
    /// JSON-lines list of `{"file", "id", "owner", "t" | "time", "labels"?}`.
    /// Without it every `<owner>_<t>_<id>.ppm` in the directory is used.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Epoch seconds of slice 0, for records giving `time`.
    #[arg(long, default_value_t = 0)]
    pub origin: i64,
    /// Slice width in seconds.
    #[arg(long, default_value_t = 7 * 24 * 3600)]
    pub slice_width: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Likelihood {
    Joint,
    Conditional,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub network: PathBuf,
    /// Category name or `all` (every labeled category).
    #[arg(long, default_value = "all")]
    pub category: String,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub window: usize,
    /// Outer iterations.
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub freeze_decay: bool,
    #[arg(long, value_enum)]
    pub likelihood: Option<Likelihood>,
    /// Fraction of labeled images withheld from training.
    #[arg(long, default_value_t = 0.0)]
    pub split_frac: f64,
    /// Seed of the split; derived from `--seed` when absent.
    #[arg(long)]
    pub split_seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub network: PathBuf,
    /// Parameter files, one per category.
    #[arg(long = "params", required = true, num_args = 1..)]
    pub params: Vec<PathBuf>,
    /// Split files from `train`; their images are predicted unclamped.
    #[arg(long = "split", num_args = 1..)]
    pub splits: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum AnalyzeCommand {
    /// Emotion ratio of users with and without friends showing the emotion.
    Sampling(SamplingArgs),
    /// Same-emotion rate of a user across slices.
    Temporal(TemporalArgs),
    /// Same-emotion rate between a user and friends or random users.
    Social(SocialArgs),
    /// Canonical correlation between visual features and image-scale coordinates.
    Cca(CcaArgs),
    /// Accuracy and F1 of a predictions file.
    Evaluate(EvaluateArgs),
    /// Model, baseline and single-factor ablations on held-out labels.
    Ablate(AblateArgs),
}

#[derive(Debug, Args)]
pub struct SamplingArgs {
    #[arg(long)]
    pub network: PathBuf,
    #[arg(long, default_value = "happiness")]
    pub category: String,
    #[arg(long, default_value_t = 50)]
    pub group_size: usize,
    #[arg(long, default_value_t = 10)]
    pub repetitions: usize,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4")]
    pub deltas: Vec<usize>,
    /// Keep the windows `[t - dt, t]` of repetitions disjoint instead of only `t`.
    #[arg(long)]
    pub disjoint_windows: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TemporalArgs {
    #[arg(long)]
    pub network: PathBuf,
    #[arg(long, default_value = "happiness")]
    pub category: String,
    #[arg(long, default_value_t = 2500)]
    pub users: usize,
    #[arg(long, default_value_t = 29)]
    pub max_delta: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SocialArgs {
    #[arg(long)]
    pub network: PathBuf,
    #[arg(long, default_value = "happiness")]
    pub category: String,
    #[arg(long, default_value_t = 1000)]
    pub users: usize,
    #[arg(long, default_value_t = 12)]
    pub max_delta: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CcaArgs {
    #[arg(long)]
    pub network: PathBuf,
    /// CSV with header `id,<scale>...`, one row per image.
    #[arg(long)]
    pub scales: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub network: PathBuf,
    #[arg(long)]
    pub predictions: PathBuf,
    /// Restrict scoring to the held-out images of these split files.
    #[arg(long = "split", num_args = 1..)]
    pub splits: Vec<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[arg(long)]
    pub network: PathBuf,
    #[arg(long, default_value = "all")]
    pub category: String,
    #[arg(long, default_value_t = 0.2)]
    pub split_frac: f64,
    /// Independent splits averaged per cell.
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
    #[arg(long, default_value_t = 1)]
    pub window: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Generator settings (JSON); defaults apply to missing fields.
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DotArgs {
    #[arg(long)]
    pub predictions: PathBuf,
    #[arg(long)]
    pub network: PathBuf,
    #[arg(long)]
    pub user: u32,
    #[arg(long, default_value = "happiness")]
    pub category: String,
    #[arg(long, default_value_t = 0.5)]
    pub min_weight: f64,
    /// Trailing slices shown.
    #[arg(long, default_value_t = 5)]
    pub slices: usize,
    #[arg(long)]
    pub out: PathBuf,
}
