//! Dataset directory ingestion and writing.
//!
//! Layout:
//!
//! ```text
//! dataset/
//!   manifest.json          channels + per-trial metadata
//!   <trial>.csv            header `t,ch0,...,chN-1`, one row per sample
//! ```
//!
//! Trial files are plain decimal ASCII. Writers emit 10 significant digits
//! (`{:.9e}`), comfortably above the 9-digit floor the format guarantees,
//! and always produce byte-identical files for identical inputs.
//!
//! Numeric parsing is hand-rolled (`str::split` + `f64::parse`): trial files
//! run to hundreds of thousands of rows, the schema is fixed, and errors
//! must name the trial, line and column — a general CSV reader buys nothing
//! here.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::label::{Action, ActionLabel, Digit, Joint, Limb};
use crate::data::{ChannelId, Dataset, TrialRecord};
use crate::error::{Error, Result};

pub const MANIFEST_NAME: &str = "manifest.json";

/// Label fields as they appear in manifest JSON. Tokens are kept as strings
/// during parsing so errors can name the offending trial and field.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct LabelJson {
    limb: String,
    joint: String,
    action: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    digit: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    posture_deg: Option<u16>,
}

impl LabelJson {
    fn from_label(label: &ActionLabel) -> Self {
        LabelJson {
            limb: label.limb.token().to_string(),
            joint: label.joint.token().to_string(),
            action: label.action.token().to_string(),
            digit: label.digit.map(|d| d.token().to_string()),
            posture_deg: label.posture_deg,
        }
    }

    fn to_label(&self, trial_id: &str) -> Result<ActionLabel> {
        let unknown = |field: &str, token: &str| Error::UnknownToken {
            trial_id: trial_id.to_string(),
            field: field.to_string(),
            token: token.to_string(),
        };
        let label = ActionLabel {
            limb: Limb::from_token(&self.limb).ok_or_else(|| unknown("limb", &self.limb))?,
            joint: Joint::from_token(&self.joint).ok_or_else(|| unknown("joint", &self.joint))?,
            action: Action::from_token(&self.action)
                .ok_or_else(|| unknown("action", &self.action))?,
            digit: self
                .digit
                .as_deref()
                .map(|d| Digit::from_token(d).ok_or_else(|| unknown("digit", d)))
                .transpose()?,
            posture_deg: self.posture_deg,
        };
        label.validate().map_err(|e| Error::InvalidLabel {
            trial_id: trial_id.to_string(),
            reason: e.to_string(),
        })?;
        Ok(label)
    }
}

/// Per-trial manifest entry; `file` is relative to the dataset directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestTrial {
    pub trial_id: String,
    pub subject_id: String,
    pub file: String,
    label: LabelJson,
    pub sample_rate_hz: f64,
    pub relaxation_s: f64,
    pub duration_s: f64,
}

impl ManifestTrial {
    pub fn new(
        trial_id: impl Into<String>,
        subject_id: impl Into<String>,
        file: impl Into<String>,
        label: &ActionLabel,
        sample_rate_hz: f64,
        relaxation_s: f64,
        duration_s: f64,
    ) -> Self {
        ManifestTrial {
            trial_id: trial_id.into(),
            subject_id: subject_id.into(),
            file: file.into(),
            label: LabelJson::from_label(label),
            sample_rate_hz,
            relaxation_s,
            duration_s,
        }
    }

    pub fn label(&self) -> Result<ActionLabel> {
        self.label.to_label(&self.trial_id)
    }
}

/// Dataset metadata: everything except the sample matrices. Loading the
/// manifest alone allows streaming consumers to process trials one at a
/// time instead of materializing multi-gigabyte datasets.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub channels: Vec<ChannelId>,
    pub trials: Vec<ManifestTrial>,
}

impl Manifest {
    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }
}

// --- writing ---------------------------------------------------------------

/// Writes `ds` as a dataset directory (creating it if needed). Existing
/// files of the same names are overwritten; writers are deterministic, so
/// re-saving the same dataset is a no-op at the byte level.
pub fn save_dataset(ds: &Dataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    let trials: Vec<ManifestTrial> = ds
        .trials()
        .iter()
        .map(|t| ManifestTrial {
            trial_id: t.trial_id.clone(),
            subject_id: t.subject_id.clone(),
            file: format!("{}.csv", t.trial_id),
            label: LabelJson::from_label(&t.label),
            sample_rate_hz: t.sample_rate_hz,
            relaxation_s: t.relaxation_s,
            duration_s: t.duration_s,
        })
        .collect();
    let manifest = Manifest {
        channels: ds.channels().to_vec(),
        trials,
    };
    save_manifest(&manifest, dir)?;

    for (trial, entry) in ds.trials().iter().zip(&manifest.trials) {
        write_trial_csv(trial, &dir.join(&entry.file))?;
    }
    Ok(())
}

/// Writes just the manifest. Streaming writers pair this with
/// [`write_trial_csv`] to emit trials one at a time.
pub fn save_manifest(manifest: &Manifest, dir: &Path) -> Result<()> {
    let json = serde_json::to_string_pretty(manifest)
        .map_err(|e| Error::json("serializing manifest", e))?;
    let path = dir.join(MANIFEST_NAME);
    fs::write(&path, json + "\n")
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Writes one trial's sample matrix as a trial CSV file.
pub fn write_trial_csv(trial: &TrialRecord, path: &Path) -> Result<()> {
    let file =
        fs::File::create(path).map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e: std::io::Error| Error::io(format!("writing {}", path.display()), e);

    write!(w, "t").map_err(io_err)?;
    for ch in 0..trial.n_channels() {
        write!(w, ",ch{ch}").map_err(io_err)?;
    }
    writeln!(w).map_err(io_err)?;

    let n = trial.expected_samples();
    for i in 0..n {
        let t = i as f64 / trial.sample_rate_hz;
        write!(w, "{t:.9e}").map_err(io_err)?;
        for col in &trial.samples {
            write!(w, ",{:.9e}", col[i]).map_err(io_err)?;
        }
        writeln!(w).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

// --- reading ---------------------------------------------------------------

/// Reads and validates the manifest of a dataset directory.
pub fn load_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST_NAME);
    if !path.is_file() {
        return Err(Error::NoManifest {
            dir: dir.to_path_buf(),
        });
    }
    let text =
        fs::read_to_string(&path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let manifest: Manifest = serde_json::from_str(&text)
        .map_err(|e| Error::json(format!("parsing {}", path.display()), e))?;

    for (i, ch) in manifest.channels.iter().enumerate() {
        if ch.index != i {
            return Err(Error::DuplicateChannel(ch.index));
        }
    }
    let mut seen = std::collections::HashSet::new();
    for trial in &manifest.trials {
        if !seen.insert(trial.trial_id.as_str()) {
            return Err(Error::DuplicateTrialId {
                trial_id: trial.trial_id.clone(),
            });
        }
        trial.label()?; // validates tokens with trial context
    }
    Ok(manifest)
}

/// Loads a single trial's samples. This is the streaming entry point: the
/// caller iterates manifest entries and drops each `TrialRecord` when done.
pub fn load_trial(dir: &Path, manifest: &Manifest, index: usize) -> Result<TrialRecord> {
    let entry = manifest.trials.get(index).ok_or_else(|| {
        Error::InvalidConfig(format!(
            "trial index {index} out of range ({} trials)",
            manifest.trials.len()
        ))
    })?;
    let label = entry.label()?;
    let path = dir.join(&entry.file);
    let samples = read_trial_csv(&path, &entry.trial_id, manifest.n_channels())?;
    let trial = TrialRecord {
        trial_id: entry.trial_id.clone(),
        subject_id: entry.subject_id.clone(),
        label,
        sample_rate_hz: entry.sample_rate_hz,
        relaxation_s: entry.relaxation_s,
        duration_s: entry.duration_s,
        samples,
    };
    trial.validate()?;
    Ok(trial)
}

/// Loads a full dataset into memory. For very large datasets prefer
/// [`load_manifest`] + [`load_trial`].
pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let manifest = load_manifest(dir)?;
    let trials: Vec<TrialRecord> = (0..manifest.trials.len())
        .map(|i| load_trial(dir, &manifest, i))
        .collect::<Result<_>>()?;
    Dataset::new(manifest.channels, trials)
}

fn read_trial_csv(path: &Path, trial_id: &str, n_channels: usize) -> Result<Vec<Vec<f64>>> {
    let malformed = |reason: String| Error::MalformedTrialFile {
        trial_id: trial_id.to_string(),
        file: path.to_path_buf(),
        reason,
    };
    let file = fs::File::open(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            malformed("file not found".to_string())
        } else {
            Error::io(format!("opening {}", path.display()), e)
        }
    })?;
    let mut reader = BufReader::new(file);

    let mut header = String::new();
    reader
        .read_line(&mut header)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let expected_header = {
        let mut h = String::from("t");
        for ch in 0..n_channels {
            h.push_str(&format!(",ch{ch}"));
        }
        h
    };
    if header.trim_end() != expected_header {
        return Err(malformed(format!(
            "header '{}' does not match expected '{expected_header}'",
            header.trim_end()
        )));
    }

    let mut samples: Vec<Vec<f64>> = vec![Vec::new(); n_channels];
    let mut line = String::new();
    let mut line_no = 1usize;
    loop {
        line.clear();
        let read = reader
            .read_line(&mut line)
            .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        if read == 0 {
            break;
        }
        line_no += 1;
        let row = line.trim_end();
        if row.is_empty() {
            continue;
        }
        let mut fields = row.split(',');
        let t_field = fields.next().unwrap_or("");
        t_field
            .parse::<f64>()
            .map_err(|_| malformed(format!("line {line_no}: bad time value '{t_field}'")))?;
        let mut count = 0usize;
        for (ch, field) in fields.enumerate() {
            if ch >= n_channels {
                count += 1;
                continue;
            }
            let v: f64 = field.parse().map_err(|_| {
                malformed(format!("line {line_no}, column ch{ch}: bad value '{field}'"))
            })?;
            samples[ch].push(v);
            count += 1;
        }
        if count != n_channels {
            return Err(malformed(format!(
                "line {line_no}: expected {n_channels} channel columns, found {count}"
            )));
        }
    }
    Ok(samples)
}

/// Convenience: where a trial file lives inside a dataset directory.
pub fn trial_path(dir: &Path, entry: &ManifestTrial) -> PathBuf {
    dir.join(&entry.file)
}
