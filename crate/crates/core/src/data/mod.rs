//! Domain data model: channels, trials, datasets, splitting, and directory
//! ingestion.

mod io;
mod label;
mod split;

pub use io::{
    load_dataset, load_manifest, load_trial, save_dataset, save_manifest, trial_path,
    write_trial_csv, Manifest, ManifestTrial,
};
pub use label::{Action, ActionLabel, Digit, Joint, Limb};
pub use split::{split_dataset, stratified_split_indices, SplitSpec};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One recording channel: a dense index plus a human-readable electrode
/// placement tag (e.g. `forearm-posterior-#3`).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChannelId {
    pub index: usize,
    #[serde(default)]
    pub placement: String,
}

impl ChannelId {
    pub fn new(index: usize, placement: impl Into<String>) -> Self {
        ChannelId {
            index,
            placement: placement.into(),
        }
    }
}

/// One labeled multi-channel recording.
///
/// `samples[ch][i]` is the voltage of channel `ch` at sample `i`; all
/// channels share the trial's sample rate and length.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial_id: String,
    pub subject_id: String,
    pub label: ActionLabel,
    pub sample_rate_hz: f64,
    pub relaxation_s: f64,
    pub duration_s: f64,
    pub samples: Vec<Vec<f64>>,
}

impl TrialRecord {
    /// Number of samples implied by the timing metadata.
    pub fn expected_samples(&self) -> usize {
        (self.duration_s * self.sample_rate_hz).round() as usize
    }

    pub fn n_channels(&self) -> usize {
        self.samples.len()
    }

    /// Checks the per-trial invariants: positive rate, relaxation shorter
    /// than the trial, every channel exactly `round(duration * fs)` samples,
    /// all samples finite, and a taxonomically valid label.
    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "trial '{}': sample_rate_hz must be positive, got {}",
                self.trial_id, self.sample_rate_hz
            )));
        }
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "trial '{}': duration_s must be positive, got {}",
                self.trial_id, self.duration_s
            )));
        }
        if !(self.relaxation_s.is_finite()
            && self.relaxation_s >= 0.0
            && self.relaxation_s < self.duration_s)
        {
            return Err(Error::InvalidConfig(format!(
                "trial '{}': relaxation_s must lie in [0, duration), got {}",
                self.trial_id, self.relaxation_s
            )));
        }
        if self.samples.is_empty() {
            return Err(Error::ChannelCountMismatch {
                trial_id: self.trial_id.clone(),
                expected: 1,
                found: 0,
            });
        }
        let expected = self.expected_samples();
        for (ch, col) in self.samples.iter().enumerate() {
            if col.len() != expected {
                return Err(Error::SampleCountMismatch {
                    trial_id: self.trial_id.clone(),
                    expected,
                    found: col.len(),
                });
            }
            if let Some(index) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFiniteSample {
                    trial_id: self.trial_id.clone(),
                    channel: ch,
                    index,
                });
            }
        }
        self.label.validate().map_err(|e| Error::InvalidLabel {
            trial_id: self.trial_id.clone(),
            reason: e.to_string(),
        })
    }
}

/// A set of trials sharing one channel layout, plus the canonical class
/// list (distinct labels in lexicographic order).
#[derive(Debug, Clone)]
pub struct Dataset {
    channels: Vec<ChannelId>,
    trials: Vec<TrialRecord>,
    classes: Vec<ActionLabel>,
}

impl Dataset {
    /// Builds a dataset, deriving the class list from the trial labels.
    pub fn new(channels: Vec<ChannelId>, trials: Vec<TrialRecord>) -> Result<Self> {
        let mut classes: Vec<ActionLabel> = trials.iter().map(|t| t.label.clone()).collect();
        classes.sort();
        classes.dedup();
        Self::with_classes(channels, trials, classes)
    }

    /// Builds a dataset with an explicit class list. The list must be
    /// canonically sorted, duplicate-free and cover every trial label; split
    /// datasets use this so train/test sides keep identical class indexing
    /// even if one side loses a class.
    pub fn with_classes(
        channels: Vec<ChannelId>,
        trials: Vec<TrialRecord>,
        classes: Vec<ActionLabel>,
    ) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::InvalidConfig(
                "dataset must have at least one channel".into(),
            ));
        }
        for (i, ch) in channels.iter().enumerate() {
            if ch.index != i {
                return Err(Error::DuplicateChannel(ch.index));
            }
        }
        {
            let mut tags: Vec<&str> = channels
                .iter()
                .map(|c| c.placement.as_str())
                .filter(|t| !t.is_empty())
                .collect();
            tags.sort_unstable();
            if let Some(w) = tags.windows(2).find(|w| w[0] == w[1]) {
                return Err(Error::DuplicatePlacement(w[0].to_string()));
            }
        }
        if !classes.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidConfig(
                "class list must be sorted and duplicate-free".into(),
            ));
        }
        for label in &classes {
            label.validate()?;
        }
        let mut seen = std::collections::HashSet::new();
        for trial in &trials {
            if !seen.insert(trial.trial_id.clone()) {
                return Err(Error::DuplicateTrialId {
                    trial_id: trial.trial_id.clone(),
                });
            }
            if trial.n_channels() != channels.len() {
                return Err(Error::ChannelCountMismatch {
                    trial_id: trial.trial_id.clone(),
                    expected: channels.len(),
                    found: trial.n_channels(),
                });
            }
            trial.validate()?;
            if classes.binary_search(&trial.label).is_err() {
                return Err(Error::UnknownClass {
                    label: trial.label.to_string(),
                });
            }
        }
        Ok(Dataset {
            channels,
            trials,
            classes,
        })
    }

    pub fn channels(&self) -> &[ChannelId] {
        &self.channels
    }

    pub fn trials(&self) -> &[TrialRecord] {
        &self.trials
    }

    pub fn classes(&self) -> &[ActionLabel] {
        &self.classes
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    /// Position of `label` in the canonical class list.
    pub fn class_index(&self, label: &ActionLabel) -> Option<usize> {
        self.classes.binary_search(label).ok()
    }

    /// Per-trial class indices, aligned with `trials()`.
    pub fn class_indices(&self) -> Vec<usize> {
        self.trials
            .iter()
            .map(|t| {
                self.class_index(&t.label)
                    .expect("dataset invariant: every trial label is in the class list")
            })
            .collect()
    }

    /// Restricts every trial to the given channel positions (which must be
    /// strictly increasing). Channel ids keep their original placement tags;
    /// indices are re-densified to `0..subset.len()`.
    pub fn select_channels(&self, subset: &[usize]) -> Result<Dataset> {
        validate_subset(subset, self.n_channels())?;
        let channels: Vec<ChannelId> = subset
            .iter()
            .enumerate()
            .map(|(new_idx, &old)| ChannelId::new(new_idx, self.channels[old].placement.clone()))
            .collect();
        let trials: Vec<TrialRecord> = self
            .trials
            .iter()
            .map(|t| {
                let samples = subset.iter().map(|&c| t.samples[c].clone()).collect();
                TrialRecord {
                    samples,
                    ..t.clone()
                }
            })
            .collect();
        Dataset::with_classes(channels, trials, self.classes.clone())
    }

    /// Keeps only trials whose label is in `keep`; the class list shrinks to
    /// the retained labels (still canonically ordered).
    pub fn filter_classes(&self, keep: &[ActionLabel]) -> Result<Dataset> {
        if keep.is_empty() {
            return Err(Error::InvalidConfig("class filter is empty".into()));
        }
        for label in keep {
            if self.class_index(label).is_none() {
                return Err(Error::UnknownClass {
                    label: label.to_string(),
                });
            }
        }
        let trials: Vec<TrialRecord> = self
            .trials
            .iter()
            .filter(|t| keep.contains(&t.label))
            .cloned()
            .collect();
        let mut classes: Vec<ActionLabel> = keep.to_vec();
        classes.sort();
        classes.dedup();
        Dataset::with_classes(self.channels.clone(), trials, classes)
    }
}

/// Shared validation for channel-subset arguments: nonempty, strictly
/// increasing, in range.
pub fn validate_subset(subset: &[usize], n_channels: usize) -> Result<()> {
    if subset.is_empty() {
        return Err(Error::InvalidConfig("channel subset is empty".into()));
    }
    if !subset.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::SubsetNotIncreasing {
            got: subset.to_vec(),
        });
    }
    if let Some(&bad) = subset.iter().find(|&&c| c >= n_channels) {
        return Err(Error::ChannelOutOfRange {
            index: bad,
            n_channels,
        });
    }
    Ok(())
}
