//! Command-line surface: global flags, subcommands, and shared option
//! groups. Parsing-level misuse (unknown flags, missing required arguments,
//! conflicting options) is rejected by clap with exit code 2, matching the
//! usage-error convention used for semantic configuration errors.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use semg_core::dsp::{FilterSpec, RmsParams};

#[derive(Parser)]
#[command(
    name = "semg",
    version,
    about = "Surface-EMG movement classification toolkit: deterministic synthetic data, \
             IIR filtering, moving-RMS features, SVM training, and exhaustive \
             channel-subset search",
    propagate_version = true
)]
pub struct Cli {
    /// Master seed; every random draw (synthesis, splits, SVM sweeps)
    /// derives from it, so identical flags reproduce identical outputs.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads for parallel stages (0 = all cores). Results and
    /// output files do not depend on this.
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,

    /// Directory for generated files.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,

    #[command(subcommand)]
    pub cmd: Cmd,
}

impl Cli {
    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }
}

#[derive(Subcommand)]
pub enum Cmd {
    /// Generate a synthetic dataset from a preset or a profile file
    Synth(SynthArgs),
    /// Filter trials and dump their moving-RMS series as CSV
    Preprocess(PreprocessArgs),
    /// Export normalized feature vectors as CSV
    Features(FeaturesArgs),
    /// Train a multiclass SVM on a dataset and save it as JSON
    Train(TrainArgs),
    /// Evaluate a saved model: accuracy and per-class confusion counts
    Eval(EvalArgs),
    /// Exhaustive channel-subset x normalizer accuracy search
    Search(SearchArgs),
    /// Train/test accuracy matrix across condition datasets
    CrossEval(CrossEvalArgs),
}

/// Filtering and RMS options shared by every dataset-consuming command.
#[derive(Args)]
pub struct PipelineOpts {
    /// Disable the mains notch stage
    #[arg(long)]
    pub no_notch: bool,

    /// Forward-backward (zero-phase) filtering
    #[arg(long)]
    pub zero_phase: bool,

    /// RMS window length in seconds
    #[arg(long, default_value_t = 0.020)]
    pub window_s: f64,

    /// RMS hop in seconds
    #[arg(long, default_value_t = 0.005)]
    pub hop_s: f64,
}

impl PipelineOpts {
    /// Filter chain for a dataset sampled at `fs` Hz.
    pub fn fspec(&self, fs: f64) -> FilterSpec {
        FilterSpec {
            notch_enabled: !self.no_notch,
            zero_phase: self.zero_phase,
            ..FilterSpec::for_sample_rate(fs)
        }
    }

    pub fn rms(&self) -> RmsParams {
        RmsParams {
            window_s: self.window_s,
            hop_s: self.hop_s,
        }
    }
}

#[derive(Args)]
pub struct SynthArgs {
    /// Built-in gain-profile preset (see error message for the list)
    #[arg(long, required_unless_present = "profile", conflicts_with = "profile")]
    pub preset: Option<String>,

    /// JSON profile file: {"classes": [..], "gains": [[..]], "channels"?: [..],
    /// "config"?: {..}}
    #[arg(long)]
    pub profile: Option<PathBuf>,

    /// Trials per class
    #[arg(long, default_value_t = 60)]
    pub trials: usize,

    /// Posture variant in degrees, for presets with posture-dependent gains
    #[arg(long)]
    pub posture: Option<u16>,
}

#[derive(Args)]
pub struct PreprocessArgs {
    /// Dataset directory
    #[arg(long)]
    pub dataset: PathBuf,

    #[command(flatten)]
    pub pipeline: PipelineOpts,
}

#[derive(Args)]
pub struct FeaturesArgs {
    /// Dataset directory
    #[arg(long)]
    pub dataset: PathBuf,

    /// Emit features for this normalizer channel only (default: one row
    /// per trial per candidate normalizer)
    #[arg(long)]
    pub normalizer: Option<usize>,

    #[command(flatten)]
    pub pipeline: PipelineOpts,
}

#[derive(Args)]
pub struct TrainArgs {
    /// Dataset directory
    #[arg(long)]
    pub dataset: PathBuf,

    /// Normalizer channel for ratio features (omit to train on raw peaks)
    #[arg(long)]
    pub normalizer: Option<usize>,

    /// Channel subset, e.g. 0,2,3 (default: all channels)
    #[arg(long, value_delimiter = ',')]
    pub subset: Option<Vec<usize>>,

    /// Soft-margin penalty C
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,

    /// RBF kernel width (default: derived from feature variance)
    #[arg(long, conflicts_with = "linear")]
    pub gamma: Option<f64>,

    /// Linear kernel instead of RBF
    #[arg(long)]
    pub linear: bool,

    /// Standardize features before training
    #[arg(long)]
    pub standardize: bool,

    /// Cap on training sweeps
    #[arg(long)]
    pub max_iter: Option<u32>,

    /// Fail (exit 4) when any pairwise training does not converge
    #[arg(long)]
    pub strict: bool,

    #[command(flatten)]
    pub pipeline: PipelineOpts,
}

#[derive(Args)]
pub struct EvalArgs {
    /// Dataset directory
    #[arg(long)]
    pub dataset: PathBuf,

    /// Saved model JSON
    #[arg(long)]
    pub model: PathBuf,

    /// Normalizer channel used at training time (omit for raw-peak models)
    #[arg(long)]
    pub normalizer: Option<usize>,

    /// Channel subset used at training time (default: all channels)
    #[arg(long, value_delimiter = ',')]
    pub subset: Option<Vec<usize>>,

    #[command(flatten)]
    pub pipeline: PipelineOpts,
}

#[derive(Args)]
pub struct SearchArgs {
    /// Dataset directory
    #[arg(long, required_unless_present = "config", conflicts_with = "config")]
    pub dataset: Option<PathBuf>,

    /// Experiment config JSON ({"dataset": .., "search": {"max_k": ..}, ..});
    /// replaces the sweep flags below
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Largest subset size to enumerate (default: channel count)
    #[arg(long, conflicts_with = "config")]
    pub max_k: Option<usize>,

    /// Train/test re-splits averaged per candidate
    #[arg(long, default_value_t = 5, conflicts_with = "config")]
    pub repeats: u32,

    /// Keep only these classes, e.g.
    /// upper.finger.flexion.thumb,upper.finger.flexion.index
    #[arg(long, value_delimiter = ',', conflicts_with = "config")]
    pub classes: Option<Vec<String>>,

    /// Training fraction of each split
    #[arg(long, default_value_t = 0.8, conflicts_with = "config")]
    pub train_fraction: f64,

    /// Fail (exit 4) when any evaluated subset had non-converged pairs
    #[arg(long)]
    pub strict: bool,

    #[command(flatten)]
    pub pipeline: PipelineOpts,
}

#[derive(Args)]
pub struct CrossEvalArgs {
    /// Condition dataset directories; the command trains on each and tests
    /// on every other, printing the full accuracy matrix
    #[arg(long, num_args = 1.., required = true)]
    pub datasets: Vec<PathBuf>,

    /// Channel subset (default: all channels)
    #[arg(long, value_delimiter = ',')]
    pub subset: Option<Vec<usize>>,

    #[command(flatten)]
    pub pipeline: PipelineOpts,
}
