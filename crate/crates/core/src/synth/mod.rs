//! Deterministic synthetic multi-channel sEMG generator.
//!
//! Each trial is: per-channel Gaussian baseline noise + a mains sinusoid
//! (random phase per channel) + one activation burst. The burst is a
//! constant-envelope frequency-modulated carrier — unit RMS by
//! construction — shaped by a Hann or trapezoid envelope and scaled by the
//! class/channel gain and multiplicative jitter (one shared factor per
//! trial plus a small per-channel factor, modeling force/fatigue
//! variation that ratio normalization is meant to cancel).
//!
//! A constant-envelope carrier is used instead of filtered Gaussian noise
//! because the generator's contract is amplitude ground truth: the 20 ms
//! RMS of a unit-RMS Gaussian carrier fluctuates by tens of percent, which
//! would break the "peak RMS ≈ gain" calibration this generator exists to
//! provide. The FM carrier keeps the occupied band inside `carrier_band`
//! (verified spectrally in tests) while holding local RMS constant.
//!
//! Everything is a pure function of (config, gain profile, seed): trial
//! seeds derive from (seed, class, repeat), so generation order and
//! parallel scheduling never change a sample.

mod presets;

pub use presets::{preset, preset_names, Preset};

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use std::f64::consts::PI;
use std::path::Path;

use crate::data::{
    save_manifest, write_trial_csv, ActionLabel, ChannelId, Dataset, Manifest, ManifestTrial,
    TrialRecord,
};
use crate::error::{Error, Result};
use crate::seed::{self, tag};

/// Fraction of the carrier band's width used as peak frequency deviation.
const CARRIER_DEV_FRACTION: f64 = 0.15;
/// Fraction of the carrier band's width kept as guard margin on each side.
const CARRIER_MARGIN_FRACTION: f64 = 0.05;

/// Envelope applied to the activation burst.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvelopeKind {
    Hann,
    /// 10% linear ramps with an 80% flat top.
    Trapezoid,
}

impl EnvelopeKind {
    /// Envelope value at burst progress `u` in [0, 1).
    fn at(self, u: f64) -> f64 {
        match self {
            EnvelopeKind::Hann => 0.5 * (1.0 - (2.0 * PI * u).cos()),
            EnvelopeKind::Trapezoid => {
                if u < 0.1 {
                    u / 0.1
                } else if u > 0.9 {
                    (1.0 - u) / 0.1
                } else {
                    1.0
                }
            }
        }
    }
}

/// Generator configuration. Defaults mirror the modeled acquisition
/// protocol: 15 s trials at 20 kHz with 5 s of initial relaxation, a 2 s
/// burst starting at 6 s, 50 Hz mains pickup and microvolt-scale noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub sample_rate_hz: f64,
    pub duration_s: f64,
    pub relaxation_s: f64,
    pub burst_start_s: f64,
    pub burst_len_s: f64,
    pub envelope: EnvelopeKind,
    /// Band (Hz) that must contain the burst carrier's power.
    pub carrier_band: (f64, f64),
    pub mains_hz: f64,
    /// Mains sinusoid amplitude in volts.
    pub mains_amp: f64,
    /// Baseline Gaussian noise RMS in volts.
    pub baseline_noise_rms: f64,
    /// Shared multiplicative gain jitter per trial, uniform in ±this.
    pub gain_jitter_rel: f64,
    /// Additional per-channel multiplicative jitter, uniform in ±this.
    pub channel_jitter_rel: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            sample_rate_hz: 20_000.0,
            duration_s: 15.0,
            relaxation_s: 5.0,
            burst_start_s: 6.0,
            burst_len_s: 2.0,
            envelope: EnvelopeKind::Hann,
            carrier_band: (70.0, 250.0),
            mains_hz: 50.0,
            mains_amp: 20e-6,
            baseline_noise_rms: 5e-6,
            gain_jitter_rel: 0.15,
            channel_jitter_rel: 0.05,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return bad(format!("sample_rate_hz must be positive, got {}", self.sample_rate_hz));
        }
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return bad(format!("duration_s must be positive, got {}", self.duration_s));
        }
        if !(self.relaxation_s >= 0.0 && self.relaxation_s < self.duration_s) {
            return bad(format!(
                "relaxation_s must lie in [0, duration), got {} of {}",
                self.relaxation_s, self.duration_s
            ));
        }
        if !(self.burst_len_s > 0.0 && self.burst_start_s >= self.relaxation_s) {
            return bad(format!(
                "burst must start at or after relaxation ({} s), got start {}",
                self.relaxation_s, self.burst_start_s
            ));
        }
        if self.burst_start_s + self.burst_len_s > self.duration_s {
            return bad(format!(
                "burst [{}, {}] s exceeds trial duration {} s",
                self.burst_start_s,
                self.burst_start_s + self.burst_len_s,
                self.duration_s
            ));
        }
        let nyquist = self.sample_rate_hz / 2.0;
        let (lo, hi) = self.carrier_band;
        if !(lo > 0.0 && lo < hi && hi < nyquist) {
            return bad(format!(
                "carrier band must satisfy 0 < lo < hi < fs/2, got ({lo}, {hi}) at fs {}",
                self.sample_rate_hz
            ));
        }
        if self.mains_amp > 0.0 && !(self.mains_hz > 0.0 && self.mains_hz < nyquist) {
            return bad(format!("mains_hz must lie in (0, fs/2), got {}", self.mains_hz));
        }
        if self.mains_amp < 0.0 || self.baseline_noise_rms < 0.0 {
            return bad("mains_amp and baseline_noise_rms must be nonnegative".to_string());
        }
        for (name, j) in [
            ("gain_jitter_rel", self.gain_jitter_rel),
            ("channel_jitter_rel", self.channel_jitter_rel),
        ] {
            if !(0.0..1.0).contains(&j) {
                return bad(format!("{name} must lie in [0, 1), got {j}"));
            }
        }
        Ok(())
    }

    pub fn n_samples(&self) -> usize {
        (self.duration_s * self.sample_rate_hz).round() as usize
    }
}

/// Per-class, per-channel burst gains in volts RMS at full activation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassGainProfile {
    /// gains[class][channel].
    pub gains: Vec<Vec<f64>>,
}

impl ClassGainProfile {
    pub fn n_classes(&self) -> usize {
        self.gains.len()
    }

    pub fn n_channels(&self) -> usize {
        self.gains.first().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<()> {
        if self.gains.is_empty() || self.n_channels() == 0 {
            return Err(Error::InvalidConfig("gain profile is empty".to_string()));
        }
        for (c, row) in self.gains.iter().enumerate() {
            if row.len() != self.n_channels() {
                return Err(Error::InvalidConfig(format!(
                    "gain row {c} has {} channels, expected {}",
                    row.len(),
                    self.n_channels()
                )));
            }
            if row.iter().any(|g| !g.is_finite() || *g < 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "gain row {c} contains negative or non-finite entries"
                )));
            }
        }
        Ok(())
    }
}

/// Carrier frequency plan derived from the configured band: centered on the
/// band's geometric mean (clamped so deviation plus guard margin stays
/// inside), with slow FM that keeps instantaneous frequency within
/// ±deviation of the center.
struct CarrierPlan {
    center_hz: f64,
    deviation_hz: f64,
    mod_cutoff_hz: f64,
}

impl CarrierPlan {
    fn new(band: (f64, f64)) -> CarrierPlan {
        let (lo, hi) = band;
        let width = hi - lo;
        let deviation = CARRIER_DEV_FRACTION * width;
        let margin = CARRIER_MARGIN_FRACTION * width;
        // Deviation + margin total 40% of the width, so this clamp range is
        // always non-empty.
        let center = (lo * hi).sqrt().clamp(lo + margin + deviation, hi - margin - deviation);
        CarrierPlan {
            center_hz: center,
            deviation_hz: deviation,
            mod_cutoff_hz: (0.25 * deviation).max(1.0),
        }
    }
}

/// Unit-RMS constant-envelope FM carrier for the burst segment.
fn fm_carrier(n: usize, fs: f64, plan: &CarrierPlan, rng: &mut ChaCha12Rng) -> Vec<f64> {
    // Slow modulation signal: one-pole low-passed uniform noise, normalized
    // to exactly fill ±1 over this burst.
    let beta = (-2.0 * PI * plan.mod_cutoff_hz / fs).exp();
    let mut m = Vec::with_capacity(n);
    let mut state = 0.0;
    for _ in 0..n {
        let white: f64 = rng.random_range(-1.0..=1.0);
        state = beta * state + (1.0 - beta) * white;
        m.push(state);
    }
    let peak = m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    let scale = if peak > 0.0 { 1.0 / peak } else { 0.0 };

    let mut phase: f64 = rng.random_range(0.0..=2.0 * PI);
    let mut out = Vec::with_capacity(n);
    for mv in m {
        let f_inst = plan.center_hz + plan.deviation_hz * mv * scale;
        phase += 2.0 * PI * f_inst / fs;
        out.push(std::f64::consts::SQRT_2 * phase.sin());
    }
    out
}

/// Generates one trial's sample matrix from an explicit trial seed.
fn synth_samples(cfg: &SynthConfig, gains: &[f64], trial_seed: u64) -> Vec<Vec<f64>> {
    let fs = cfg.sample_rate_hz;
    let n = cfg.n_samples();
    let burst_start = (cfg.burst_start_s * fs).round() as usize;
    let burst_len = (cfg.burst_len_s * fs).round() as usize;
    let plan = CarrierPlan::new(cfg.carrier_band);

    let mut rng = seed::rng(trial_seed, &[]);
    // One shared gain jitter per trial; ratio features should cancel it.
    let shared = 1.0 + rng.random_range(-cfg.gain_jitter_rel..=cfg.gain_jitter_rel);

    let mut channels = Vec::with_capacity(gains.len());
    for &gain in gains {
        // Fixed per-channel draw order: phase, jitter, carrier, noise.
        let mains_phase: f64 = rng.random_range(0.0..=2.0 * PI);
        let channel_jitter =
            1.0 + rng.random_range(-cfg.channel_jitter_rel..=cfg.channel_jitter_rel);
        let carrier = fm_carrier(burst_len.min(n), fs, &plan, &mut rng);

        let g = gain * shared * channel_jitter;
        let omega_mains = 2.0 * PI * cfg.mains_hz / fs;
        let mut x = Vec::with_capacity(n);
        for i in 0..n {
            let mut v = cfg.baseline_noise_rms * rng.sample::<f64, _>(StandardNormal);
            if cfg.mains_amp > 0.0 {
                v += cfg.mains_amp * (omega_mains * i as f64 + mains_phase).sin();
            }
            if i >= burst_start && i < burst_start + carrier.len() {
                let k = i - burst_start;
                let u = k as f64 / burst_len as f64;
                v += g * cfg.envelope.at(u) * carrier[k];
            }
            x.push(v);
        }
        channels.push(x);
    }
    channels
}

/// Canonical trial id for (class, repeat).
pub fn trial_id(class_idx: usize, repeat: usize) -> String {
    format!("c{class_idx:02}r{repeat:03}")
}

/// Generates one labeled trial. The trial seed derives from
/// (cfg.seed, class_idx, repeat), never from generation order.
pub fn generate_trial(
    cfg: &SynthConfig,
    profile: &ClassGainProfile,
    classes: &[ActionLabel],
    class_idx: usize,
    repeat: usize,
) -> Result<TrialRecord> {
    cfg.validate()?;
    profile.validate()?;
    if classes.len() != profile.n_classes() {
        return Err(Error::InvalidConfig(format!(
            "{} class labels for {} gain rows",
            classes.len(),
            profile.n_classes()
        )));
    }
    let Some(label) = classes.get(class_idx) else {
        return Err(Error::InvalidConfig(format!(
            "class index {class_idx} out of range for {} classes",
            classes.len()
        )));
    };
    let trial_seed = seed::mix(cfg.seed, &[tag::TRIAL, class_idx as u64, repeat as u64]);
    let samples = synth_samples(cfg, &profile.gains[class_idx], trial_seed);
    let trial = TrialRecord {
        trial_id: trial_id(class_idx, repeat),
        subject_id: "synthetic".to_string(),
        label: label.clone(),
        sample_rate_hz: cfg.sample_rate_hz,
        relaxation_s: cfg.relaxation_s,
        duration_s: cfg.duration_s,
        samples,
    };
    trial.validate()?;
    Ok(trial)
}

/// Lazily generates `classes × trials_per_class` trials in canonical order
/// (class-major, then repeat). Use this instead of [`generate_dataset`]
/// when the full sample tensor would not fit in memory.
pub fn generate_trials_iter<'a>(
    cfg: &'a SynthConfig,
    profile: &'a ClassGainProfile,
    classes: &'a [ActionLabel],
    trials_per_class: usize,
) -> impl Iterator<Item = Result<TrialRecord>> + 'a {
    (0..classes.len()).flat_map(move |class_idx| {
        (0..trials_per_class)
            .map(move |repeat| generate_trial(cfg, profile, classes, class_idx, repeat))
    })
}

/// Generates a complete in-memory dataset. Trials generate in parallel;
/// per-(class, repeat) seeds make the result schedule-independent.
pub fn generate_dataset(
    cfg: &SynthConfig,
    profile: &ClassGainProfile,
    classes: &[ActionLabel],
    channels: &[ChannelId],
    trials_per_class: usize,
) -> Result<Dataset> {
    cfg.validate()?;
    profile.validate()?;
    if trials_per_class < 2 {
        return Err(Error::InvalidConfig(format!(
            "trials_per_class must be >= 2, got {trials_per_class}"
        )));
    }
    if channels.len() != profile.n_channels() {
        return Err(Error::InvalidConfig(format!(
            "{} channel ids for {} gain columns",
            channels.len(),
            profile.n_channels()
        )));
    }
    let coords: Vec<(usize, usize)> = (0..classes.len())
        .flat_map(|c| (0..trials_per_class).map(move |r| (c, r)))
        .collect();
    let trials: Vec<TrialRecord> = coords
        .par_iter()
        .map(|&(c, r)| generate_trial(cfg, profile, classes, c, r))
        .collect::<Result<_>>()?;
    Dataset::with_classes(channels.to_vec(), trials, classes.to_vec())
}

/// Generates a dataset directly into a dataset directory, one trial in
/// memory at a time. This is the path for full-scale datasets (a 15 s ×
/// 20 kHz × 6-channel × 240-trial set is several gigabytes of samples).
pub fn write_dataset(
    cfg: &SynthConfig,
    profile: &ClassGainProfile,
    classes: &[ActionLabel],
    channels: &[ChannelId],
    trials_per_class: usize,
    dir: &Path,
) -> Result<()> {
    cfg.validate()?;
    profile.validate()?;
    if trials_per_class < 2 {
        return Err(Error::InvalidConfig(format!(
            "trials_per_class must be >= 2, got {trials_per_class}"
        )));
    }
    if channels.len() != profile.n_channels() {
        return Err(Error::InvalidConfig(format!(
            "{} channel ids for {} gain columns",
            channels.len(),
            profile.n_channels()
        )));
    }
    std::fs::create_dir_all(dir)
        .map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    let mut entries = Vec::new();
    for class_idx in 0..classes.len() {
        for repeat in 0..trials_per_class {
            let id = trial_id(class_idx, repeat);
            entries.push(ManifestTrial::new(
                id.clone(),
                "synthetic",
                format!("{id}.csv"),
                &classes[class_idx],
                cfg.sample_rate_hz,
                cfg.relaxation_s,
                cfg.duration_s,
            ));
        }
    }
    let manifest = Manifest {
        channels: channels.to_vec(),
        trials: entries,
    };
    save_manifest(&manifest, dir)?;
    for class_idx in 0..classes.len() {
        for repeat in 0..trials_per_class {
            let trial = generate_trial(cfg, profile, classes, class_idx, repeat)?;
            write_trial_csv(&trial, &dir.join(format!("{}.csv", trial.trial_id)))?;
        }
    }
    Ok(())
}
