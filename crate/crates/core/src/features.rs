//! Peak-RMS feature extraction and ratio normalization.
//!
//! Each trial reduces to one peak per channel: the maximum of the RMS
//! envelope during the action segment, minus the median RMS of the
//! relaxation segment (so per-channel noise floors cancel). A trial's
//! feature vector is the ratio of every other channel's peak to one chosen
//! normalizer channel's peak — n−1 dimensionless values that are invariant
//! to the trial's overall gain.

use std::io::Write as IoWrite;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{validate_subset, ActionLabel, Dataset, TrialRecord};
use crate::dsp::{moving_rms, FilterSpec, RmsParams};
use crate::error::{Error, Result};

/// Smallest usable normalizer peak, in volts RMS. Peaks below this are
/// treated as dead channels for normalization purposes.
pub const NORMALIZER_EPS: f64 = 1e-9;

/// Per-channel peak and baseline RMS of one trial (volts).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakProfile {
    pub peaks: Vec<f64>,
    pub baselines: Vec<f64>,
    pub trial_id: String,
}

impl PeakProfile {
    pub fn n_channels(&self) -> usize {
        self.peaks.len()
    }

    /// Restricts the profile to a strictly increasing channel subset.
    pub fn select(&self, subset: &[usize]) -> Result<PeakProfile> {
        validate_subset(subset, self.n_channels())?;
        Ok(PeakProfile {
            peaks: subset.iter().map(|&c| self.peaks[c]).collect(),
            baselines: subset.iter().map(|&c| self.baselines[c]).collect(),
            trial_id: self.trial_id.clone(),
        })
    }
}

/// One trial's normalized feature vector: peaks of the n−1 non-normalizer
/// channels divided by the normalizer channel's peak, ascending channel
/// order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub normalizer_channel: usize,
    pub values: Vec<f64>,
    pub label: ActionLabel,
}

fn median(sorted_scratch: &mut Vec<f64>) -> f64 {
    sorted_scratch.sort_by(|a, b| a.partial_cmp(b).expect("RMS values are finite"));
    let n = sorted_scratch.len();
    if n % 2 == 1 {
        sorted_scratch[n / 2]
    } else {
        (sorted_scratch[n / 2 - 1] + sorted_scratch[n / 2]) / 2.0
    }
}

/// Filters each channel, computes its RMS envelope, and reduces it to a
/// baseline-corrected peak:
///
/// * baseline = median RMS over windows ending within the relaxation
///   segment,
/// * peak = max(0, max RMS over windows ending after relaxation − baseline).
pub fn extract_peaks(
    trial: &TrialRecord,
    fspec: &FilterSpec,
    rms: &RmsParams,
) -> Result<PeakProfile> {
    if (trial.sample_rate_hz - fspec.sample_rate_hz).abs() > 1e-9 {
        return Err(Error::SampleRateMismatch {
            fspec_hz: fspec.sample_rate_hz,
            trial_id: trial.trial_id.clone(),
            trial_hz: trial.sample_rate_hz,
        });
    }
    let fs = trial.sample_rate_hz;
    rms.validate(fs)?;
    let mut peaks = Vec::with_capacity(trial.n_channels());
    let mut baselines = Vec::with_capacity(trial.n_channels());
    for channel in &trial.samples {
        let filtered = fspec.process(channel)?;
        let series = moving_rms(&filtered, fs, rms)?;
        // Windows fully inside the relaxation segment (end time <= relaxation).
        let boundary = trial.relaxation_s + 1e-12;
        let n_baseline = series
            .values
            .iter()
            .enumerate()
            .take_while(|(k, _)| series.time_of(*k) <= boundary)
            .count();
        if n_baseline == 0 {
            return Err(Error::RelaxationTooShort {
                relaxation_s: trial.relaxation_s,
                window_s: series.window_s,
            });
        }
        if n_baseline == series.len() {
            return Err(Error::InvalidConfig(format!(
                "trial '{}': no RMS windows after the relaxation segment",
                trial.trial_id
            )));
        }
        let mut scratch = series.values[..n_baseline].to_vec();
        let baseline = median(&mut scratch);
        let max_action = series.values[n_baseline..]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        peaks.push((max_action - baseline).max(0.0));
        baselines.push(baseline);
    }
    Ok(PeakProfile {
        peaks,
        baselines,
        trial_id: trial.trial_id.clone(),
    })
}

/// Ratio normalization: peaks of all channels except `normalizer`, divided
/// by the normalizer's peak. Fails with [`Error::NormalizerTooSmall`] when
/// the normalizer peak is below `eps` (callers typically skip that
/// normalizer or drop the trial).
pub fn normalize(
    p: &PeakProfile,
    normalizer: usize,
    eps: f64,
    label: ActionLabel,
) -> Result<FeatureVector> {
    let n = p.n_channels();
    if normalizer >= n {
        return Err(Error::ChannelOutOfRange {
            index: normalizer,
            n_channels: n,
        });
    }
    let denom = p.peaks[normalizer];
    if !(denom >= eps) {
        return Err(Error::NormalizerTooSmall {
            trial_id: p.trial_id.clone(),
            channel: normalizer,
            peak: denom,
            eps,
        });
    }
    let values = p
        .peaks
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != normalizer)
        .map(|(_, peak)| peak / denom)
        .collect();
    Ok(FeatureVector {
        normalizer_channel: normalizer,
        values,
        label,
    })
}

/// Peak profiles for every trial of a dataset, aligned with the dataset's
/// trial order and class indexing. Profiles are subset-independent, so one
/// profiling pass serves every (subset, normalizer) evaluation.
#[derive(Debug, Clone)]
pub struct ProfiledTrials {
    pub profiles: Vec<PeakProfile>,
    pub labels: Vec<ActionLabel>,
    /// Class index of each trial in the owning dataset's class list.
    pub class_of: Vec<usize>,
    pub n_channels: usize,
    pub n_classes: usize,
}

impl ProfiledTrials {
    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }
}

/// Extracts peak profiles for all trials (in parallel; output order matches
/// trial order regardless of scheduling).
pub fn profile_dataset(
    ds: &Dataset,
    fspec: &FilterSpec,
    rms: &RmsParams,
) -> Result<ProfiledTrials> {
    let profiles: Vec<PeakProfile> = ds
        .trials()
        .par_iter()
        .map(|t| extract_peaks(t, fspec, rms))
        .collect::<Result<_>>()?;
    let class_of = ds.class_indices();
    Ok(ProfiledTrials {
        profiles,
        labels: ds.trials().iter().map(|t| t.label.clone()).collect(),
        class_of,
        n_channels: ds.n_channels(),
        n_classes: ds.classes().len(),
    })
}

/// Streaming variant of [`profile_dataset`]: consumes trials one at a time
/// (e.g. straight from the synthetic generator), keeping only one trial's
/// sample matrix in memory. `classes` is the canonical (sorted) class list
/// the trial labels are indexed against.
pub fn profile_trials<I>(
    trials: I,
    classes: &[ActionLabel],
    n_channels: usize,
    fspec: &FilterSpec,
    rms: &RmsParams,
) -> Result<ProfiledTrials>
where
    I: IntoIterator<Item = Result<TrialRecord>>,
{
    let mut profiles = Vec::new();
    let mut labels = Vec::new();
    let mut class_of = Vec::new();
    for trial in trials {
        let trial = trial?;
        if trial.n_channels() != n_channels {
            return Err(Error::ChannelCountMismatch {
                trial_id: trial.trial_id.clone(),
                expected: n_channels,
                found: trial.n_channels(),
            });
        }
        let class = classes
            .binary_search(&trial.label)
            .map_err(|_| Error::UnknownClass {
                label: trial.label.to_string(),
            })?;
        profiles.push(extract_peaks(&trial, fspec, rms)?);
        labels.push(trial.label.clone());
        class_of.push(class);
    }
    Ok(ProfiledTrials {
        profiles,
        labels,
        class_of,
        n_channels,
        n_classes: classes.len(),
    })
}

/// Design matrix built from cached profiles.
///
/// * `normalizer = Some(c)`: ratio features over `subset` (which must
///   contain `c` and at least one other channel); rows whose normalizer
///   peak is below `eps` are dropped and counted.
/// * `normalizer = None`: raw peak features over `subset` (used for size-1
///   subsets, where a ratio would be degenerate).
pub fn design_from_profiles(
    profiled: &ProfiledTrials,
    subset: &[usize],
    normalizer: Option<usize>,
    eps: f64,
) -> Result<DesignMatrix> {
    validate_subset(subset, profiled.n_channels)?;
    let mut x = Vec::with_capacity(profiled.len());
    let mut y = Vec::with_capacity(profiled.len());
    let mut dropped = 0usize;
    match normalizer {
        Some(norm) => {
            let pos = subset.iter().position(|&c| c == norm).ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "normalizer channel {norm} is not in subset {subset:?}"
                ))
            })?;
            if subset.len() < 2 {
                return Err(Error::InvalidConfig(
                    "ratio features require a subset of at least 2 channels".to_string(),
                ));
            }
            for ((profile, &class), label) in profiled
                .profiles
                .iter()
                .zip(&profiled.class_of)
                .zip(&profiled.labels)
            {
                let selected = profile.select(subset)?;
                match normalize(&selected, pos, eps, label.clone()) {
                    Ok(f) => {
                        x.push(f.values);
                        y.push(class);
                    }
                    Err(Error::NormalizerTooSmall { .. }) => dropped += 1,
                    Err(e) => return Err(e),
                }
            }
            if x.is_empty() {
                return Err(Error::NormalizerUnusable {
                    channel: norm,
                    dropped,
                });
            }
        }
        None => {
            for (profile, &class) in profiled.profiles.iter().zip(&profiled.class_of) {
                x.push(subset.iter().map(|&c| profile.peaks[c]).collect());
                y.push(class);
            }
        }
    }
    let n_features = x.first().map_or(0, Vec::len);
    Ok(DesignMatrix {
        x,
        y,
        dropped,
        n_features,
    })
}

/// Feature matrix with aligned class indices, plus how many trials were
/// dropped because their normalizer peak was too small.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<usize>,
    pub dropped: usize,
    pub n_features: usize,
}

/// Full-pipeline design matrix: extract profiles, then ratio features over
/// `subset` normalized by channel `normalizer` (∈ subset, |subset| ≥ 2).
pub fn build_design_matrix(
    ds: &Dataset,
    subset: &[usize],
    normalizer: usize,
    fspec: &FilterSpec,
    rms: &RmsParams,
) -> Result<DesignMatrix> {
    let profiled = profile_dataset(ds, fspec, rms)?;
    design_from_profiles(&profiled, subset, Some(normalizer), NORMALIZER_EPS)
}

/// Writes features as CSV: `trial_id,normalizer,f0..fk,label`.
pub fn write_features_csv<W: IoWrite>(
    mut w: W,
    trial_ids: &[String],
    features: &[FeatureVector],
) -> Result<()> {
    if trial_ids.len() != features.len() {
        return Err(Error::InvalidConfig(format!(
            "{} trial ids for {} feature rows",
            trial_ids.len(),
            features.len()
        )));
    }
    let io_err = |e: std::io::Error| Error::io("writing features CSV", e);
    let width = features.first().map_or(0, |f| f.values.len());
    write!(w, "trial_id,normalizer").map_err(io_err)?;
    for i in 0..width {
        write!(w, ",f{i}").map_err(io_err)?;
    }
    writeln!(w, ",label").map_err(io_err)?;
    for (id, f) in trial_ids.iter().zip(features) {
        if f.values.len() != width {
            return Err(Error::DimensionMismatch {
                expected: width,
                found: f.values.len(),
            });
        }
        write!(w, "{id},{}", f.normalizer_channel).map_err(io_err)?;
        for v in &f.values {
            write!(w, ",{v:.9e}").map_err(io_err)?;
        }
        writeln!(w, ",{}", f.label).map_err(io_err)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Action, Joint, Limb};

    fn label() -> ActionLabel {
        ActionLabel::new(Limb::Upper, Joint::Wrist, Action::Flexion)
    }

    fn profile(peaks: &[f64]) -> PeakProfile {
        PeakProfile {
            peaks: peaks.to_vec(),
            baselines: vec![0.0; peaks.len()],
            trial_id: "t0".to_string(),
        }
    }

    #[test]
    fn normalize_ratio_arithmetic() {
        let f = normalize(&profile(&[2.0, 4.0, 8.0]), 0, NORMALIZER_EPS, label()).unwrap();
        assert_eq!(f.values, vec![2.0, 4.0]);
        assert_eq!(f.normalizer_channel, 0);
    }

    #[test]
    fn normalize_dimension_is_n_minus_one() {
        let f = normalize(
            &profile(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]),
            3,
            NORMALIZER_EPS,
            label(),
        )
        .unwrap();
        assert_eq!(f.values.len(), 5);
        // Ascending channel order with channel 3 removed: [1,2,3,5,6] / 4.
        assert_eq!(f.values, vec![0.25, 0.5, 0.75, 1.25, 1.5]);
    }

    #[test]
    fn normalize_small_denominator_rejected() {
        match normalize(&profile(&[0.0, 4.0, 8.0]), 0, 1e-9, label()) {
            Err(Error::NormalizerTooSmall { channel, .. }) => assert_eq!(channel, 0),
            other => panic!("expected NormalizerTooSmall, got {other:?}"),
        }
    }

    #[test]
    fn normalize_out_of_range_channel() {
        assert!(matches!(
            normalize(&profile(&[1.0, 2.0]), 5, 1e-9, label()),
            Err(Error::ChannelOutOfRange { .. })
        ));
    }

    #[test]
    fn profile_select_restricts_channels() {
        let p = PeakProfile {
            peaks: vec![1.0, 2.0, 3.0, 4.0],
            baselines: vec![0.1, 0.2, 0.3, 0.4],
            trial_id: "t".to_string(),
        };
        let s = p.select(&[1, 3]).unwrap();
        assert_eq!(s.peaks, vec![2.0, 4.0]);
        assert_eq!(s.baselines, vec![0.2, 0.4]);
        assert!(p.select(&[3, 1]).is_err());
        assert!(p.select(&[4]).is_err());
    }

    #[test]
    fn gain_invariance_of_ratios() {
        let base = profile(&[3.0e-5, 5.5e-5, 1.2e-5, 9.0e-6]);
        let scaled = profile(
            &base
                .peaks
                .iter()
                .map(|p| p * 3.7)
                .collect::<Vec<_>>(),
        );
        let f0 = normalize(&base, 1, NORMALIZER_EPS, label()).unwrap();
        let f1 = normalize(&scaled, 1, NORMALIZER_EPS, label()).unwrap();
        for (a, b) in f0.values.iter().zip(&f1.values) {
            assert!(((a - b) / a).abs() < 1e-9);
        }
    }

    #[test]
    fn median_even_and_odd() {
        let mut v = vec![3.0, 1.0, 2.0];
        assert_eq!(median(&mut v), 2.0);
        let mut v = vec![4.0, 1.0, 2.0, 3.0];
        assert_eq!(median(&mut v), 2.5);
        let mut v = vec![7.0];
        assert_eq!(median(&mut v), 7.0);
    }

    #[test]
    fn features_csv_format() {
        let features = vec![FeatureVector {
            normalizer_channel: 2,
            values: vec![0.5, 2.0],
            label: label(),
        }];
        let ids = vec!["c00r000".to_string()];
        let mut buf = Vec::new();
        write_features_csv(&mut buf, &ids, &features).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "trial_id,normalizer,f0,f1,label");
        let row = lines.next().unwrap();
        assert!(row.starts_with("c00r000,2,"));
        assert!(row.ends_with(",upper.wrist.flexion"));
        assert!(row.contains("5.000000000e-1"));
    }
}
