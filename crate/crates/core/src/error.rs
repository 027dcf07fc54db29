//! Crate-wide error type.
//!
//! Variants carry enough context (trial ids, channel indices, field names)
//! that a failure deep in a pipeline can be reported verbatim. Each variant
//! maps to an [`ErrorCategory`], which the CLI turns into its exit-code
//! contract (config -> 2, data -> 3, numeric -> 4).

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse failure class, used for CLI exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    /// Invalid parameters or configuration supplied by the caller.
    Config,
    /// Input data violates the dataset/model contract.
    Data,
    /// A numeric procedure failed to meet its guarantees.
    Numeric,
    /// Underlying I/O failure.
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    // ---- configuration -------------------------------------------------
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unknown preset '{name}'; available presets: {available}")]
    UnknownPreset { name: String, available: String },

    // ---- dataset contract ----------------------------------------------
    #[error("no manifest found in {}", dir.display())]
    NoManifest { dir: PathBuf },

    #[error("duplicate trial id '{trial_id}' in manifest")]
    DuplicateTrialId { trial_id: String },

    #[error("trial '{trial_id}': expected {expected} channels, found {found}")]
    ChannelCountMismatch {
        trial_id: String,
        expected: usize,
        found: usize,
    },

    #[error("trial '{trial_id}': expected {expected} samples (duration x sample rate), found {found}")]
    SampleCountMismatch {
        trial_id: String,
        expected: usize,
        found: usize,
    },

    #[error("trial '{trial_id}': non-finite sample at channel {channel}, index {index}")]
    NonFiniteSample {
        trial_id: String,
        channel: usize,
        index: usize,
    },

    #[error("trial '{trial_id}': unknown {field} token '{token}'")]
    UnknownToken {
        trial_id: String,
        field: String,
        token: String,
    },

    #[error("trial '{trial_id}': invalid label: {reason}")]
    InvalidLabel { trial_id: String, reason: String },

    #[error("trial '{trial_id}', file {}: {reason}", file.display())]
    MalformedTrialFile {
        trial_id: String,
        file: PathBuf,
        reason: String,
    },

    #[error("channel index {index} out of range for {n_channels} channels")]
    ChannelOutOfRange { index: usize, n_channels: usize },

    #[error("channel subset must be strictly increasing, got {got:?}")]
    SubsetNotIncreasing { got: Vec<usize> },

    #[error("duplicate channel {0} in dataset")]
    DuplicateChannel(usize),

    #[error("duplicate placement tag '{0}' in dataset")]
    DuplicatePlacement(String),

    #[error("class '{label}' has {count} trial(s); at least {required} required")]
    ClassTooSmall {
        label: String,
        count: usize,
        required: usize,
    },

    #[error("label '{label}' not present in dataset class list")]
    UnknownClass { label: String },

    #[error("datasets have mismatched channel layouts ({left} vs {right} channels)")]
    ChannelLayoutMismatch { left: usize, right: usize },

    #[error("datasets have mismatched class lists")]
    ClassListMismatch,

    #[error("model expects {expected} feature dimensions, input has {found}")]
    DimensionMismatch { expected: usize, found: usize },

    // ---- signal / features ----------------------------------------------
    #[error("signal of {len} samples is shorter than the {window} sample RMS window")]
    SignalTooShort { len: usize, window: usize },

    #[error("non-finite input sample at index {index}")]
    NonFiniteSignal { index: usize },

    #[error(
        "relaxation segment ({relaxation_s} s) holds no complete RMS window ({window_s} s)"
    )]
    RelaxationTooShort { relaxation_s: f64, window_s: f64 },

    #[error("trial '{trial_id}': normalizer channel {channel} peak {peak:e} below eps {eps:e}")]
    NormalizerTooSmall {
        trial_id: String,
        channel: usize,
        peak: f64,
        eps: f64,
    },

    #[error("normalizer channel {channel} unusable: all {dropped} rows dropped")]
    NormalizerUnusable { channel: usize, dropped: usize },

    #[error("subset {subset:?}: no usable normalizer")]
    NoUsableNormalizer { subset: Vec<usize> },

    #[error("sample rate mismatch: filter designed for {fspec_hz} Hz, trial '{trial_id}' recorded at {trial_hz} Hz")]
    SampleRateMismatch {
        fspec_hz: f64,
        trial_id: String,
        trial_hz: f64,
    },

    // ---- numeric --------------------------------------------------------
    #[error("training requires both classes; all {n} rows share one label")]
    SingleClassInput { n: usize },

    #[error("class pair ({a}, {b}) has an empty side")]
    EmptyPairSide { a: usize, b: usize },

    #[error("empty evaluation set")]
    EmptyEvaluation,

    #[error("SVM training did not converge within the iteration cap ({0} sweeps)")]
    NotConverged(u32),

    // ---- serialization / io ----------------------------------------------
    #[error("model file {}: {reason}", file.display())]
    MalformedModel { file: PathBuf, reason: String },

    #[error("unsupported model version {found} (supported: {supported})")]
    UnsupportedModelVersion { found: u32, supported: u32 },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    /// I/O error with a human-readable context string.
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    /// JSON error with a human-readable context string.
    pub fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }

    pub fn category(&self) -> ErrorCategory {
        use Error::*;
        match self {
            InvalidConfig(_) | UnknownPreset { .. } => ErrorCategory::Config,
            NoManifest { .. }
            | DuplicateTrialId { .. }
            | ChannelCountMismatch { .. }
            | SampleCountMismatch { .. }
            | NonFiniteSample { .. }
            | UnknownToken { .. }
            | InvalidLabel { .. }
            | MalformedTrialFile { .. }
            | ChannelOutOfRange { .. }
            | SubsetNotIncreasing { .. }
            | DuplicateChannel(_)
            | DuplicatePlacement(_)
            | ClassTooSmall { .. }
            | UnknownClass { .. }
            | ChannelLayoutMismatch { .. }
            | ClassListMismatch
            | DimensionMismatch { .. }
            | SignalTooShort { .. }
            | NonFiniteSignal { .. }
            | RelaxationTooShort { .. }
            | NormalizerTooSmall { .. }
            | NormalizerUnusable { .. }
            | NoUsableNormalizer { .. }
            | SampleRateMismatch { .. }
            | MalformedModel { .. }
            | UnsupportedModelVersion { .. } => ErrorCategory::Data,
            SingleClassInput { .. }
            | EmptyPairSide { .. }
            | EmptyEvaluation
            | NotConverged(_) => ErrorCategory::Numeric,
            Io { .. } | Json { .. } => ErrorCategory::Io,
        }
    }
}
