//! Surface-EMG limb-movement classification chain.
//!
//! The crate mirrors the stages of a multi-channel sEMG acquisition and
//! classification system:
//!
//! ```text
//!   raw trial (channels x samples, 20 kHz)
//!        |  50 Hz notch + 30-300 Hz Butterworth bandpass     [dsp]
//!        v
//!   filtered signal --- 20 ms moving-window RMS              [dsp]
//!        v
//!   per-channel peak RMS (baseline-subtracted)               [features]
//!        |  ratio normalization to n-1 dimensions
//!        v
//!   feature vectors --- one-vs-one soft-margin SVM (SMO)     [svm]
//!        v
//!   exhaustive channel-subset x normalizer accuracy search   [search]
//! ```
//!
//! Real recordings are ingested from dataset directories ([`data`]); the
//! [`synth`] module generates deterministic synthetic datasets with known
//! class geometry so the full chain can be verified end to end.
//!
//! Every operation is a pure function of its inputs plus an explicit seed;
//! parallel execution never changes results.

pub mod data;
pub mod dsp;
pub mod error;
pub mod features;
pub mod search;
pub mod seed;
pub mod svm;
pub mod synth;

pub use data::{
    load_dataset, load_manifest, save_dataset, split_dataset, ActionLabel, ChannelId, Dataset,
    SplitSpec, TrialRecord,
};
pub use dsp::{BiquadCascade, FilterSpec, RmsParams, RmsSeries};
pub use error::{Error, ErrorCategory, Result};
pub use features::{FeatureVector, PeakProfile};
pub use search::{Frontier, SearchConfig, SearchReport, SubsetResult};
pub use svm::{KernelSpec, MultiClassModel, SvmParams};
pub use synth::{ClassGainProfile, SynthConfig};
