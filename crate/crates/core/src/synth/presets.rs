//! Built-in electrode/gain presets, one per modeled recording session.
//!
//! Presets are embedded JSON: each names its electrode placements, the
//! movement classes, and the per-class burst gain (in microvolts) on each
//! channel. `fingers5-posture` additionally carries gain matrices for the
//! 90° and 180° forearm postures, which redistribute activity across
//! channels while keeping the class list fixed — the setup for
//! cross-posture generalization experiments.

use serde::{Deserialize, Serialize};

use crate::data::{ActionLabel, ChannelId};
use crate::error::{Error, Result};
use crate::synth::ClassGainProfile;

/// Gain matrix for an alternative forearm posture.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PostureVariant {
    pub posture_deg: u16,
    pub gains_uv: Vec<Vec<f64>>,
}

/// A named electrode/gain configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Preset {
    pub name: String,
    pub description: String,
    /// Electrode placement tags; channel indices follow list order.
    pub channels: Vec<String>,
    /// Movement classes in canonical (sorted) order.
    pub classes: Vec<ActionLabel>,
    /// Burst gains in microvolts, `gains_uv[class][channel]`.
    pub gains_uv: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub posture_variants: Vec<PostureVariant>,
}

impl Preset {
    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn channel_ids(&self) -> Vec<ChannelId> {
        self.channels
            .iter()
            .enumerate()
            .map(|(i, placement)| ChannelId::new(i, placement.clone()))
            .collect()
    }

    /// Gain profile (volts) for the default posture.
    pub fn gain_profile(&self) -> ClassGainProfile {
        to_profile(&self.gains_uv)
    }

    /// Gain profile (volts) for a specific posture; `None` selects the
    /// default matrix.
    pub fn gain_profile_for(&self, posture_deg: Option<u16>) -> Result<ClassGainProfile> {
        match posture_deg {
            None => Ok(self.gain_profile()),
            Some(deg) => {
                if let Some(v) = self.posture_variants.iter().find(|v| v.posture_deg == deg) {
                    return Ok(to_profile(&v.gains_uv));
                }
                let mut available: Vec<String> = vec!["default".to_string()];
                available.extend(self.posture_variants.iter().map(|v| v.posture_deg.to_string()));
                Err(Error::InvalidConfig(format!(
                    "preset '{}' has no posture {deg}; available: {}",
                    self.name,
                    available.join(", ")
                )))
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(format!("preset '{}': {msg}", self.name)));
        if self.channels.is_empty() || self.classes.is_empty() {
            return bad("needs at least one channel and one class".to_string());
        }
        if !self.classes.is_sorted() {
            return bad("classes must be in canonical sorted order".to_string());
        }
        if self.classes.windows(2).any(|w| w[0] == w[1]) {
            return bad("classes must be distinct".to_string());
        }
        for class in &self.classes {
            class.validate()?;
        }
        let check_matrix = |gains_uv: &Vec<Vec<f64>>, which: &str| -> Result<()> {
            if gains_uv.len() != self.classes.len() {
                return bad(format!(
                    "{which} gain matrix has {} rows for {} classes",
                    gains_uv.len(),
                    self.classes.len()
                ));
            }
            for (c, row) in gains_uv.iter().enumerate() {
                if row.len() != self.channels.len() {
                    return bad(format!(
                        "{which} gain row {c} has {} entries for {} channels",
                        row.len(),
                        self.channels.len()
                    ));
                }
            }
            Ok(())
        };
        check_matrix(&self.gains_uv, "default")?;
        for v in &self.posture_variants {
            check_matrix(&v.gains_uv, &format!("posture-{}", v.posture_deg))?;
        }
        to_profile(&self.gains_uv).validate()
    }
}

fn to_profile(gains_uv: &[Vec<f64>]) -> ClassGainProfile {
    ClassGainProfile {
        gains: gains_uv
            .iter()
            .map(|row| row.iter().map(|g| g * 1e-6).collect())
            .collect(),
    }
}

const PRESETS: &[(&str, &str)] = &[
    ("fingers4", include_str!("../../presets/fingers4.json")),
    (
        "fingers5-posture",
        include_str!("../../presets/fingers5-posture.json"),
    ),
    ("elbow4", include_str!("../../presets/elbow4.json")),
    ("shoulder6", include_str!("../../presets/shoulder6.json")),
    ("ankle3", include_str!("../../presets/ankle3.json")),
    ("knee2", include_str!("../../presets/knee2.json")),
];

/// Names of all built-in presets.
pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|(name, _)| *name).collect()
}

/// Loads a built-in preset by name.
pub fn preset(name: &str) -> Result<Preset> {
    let Some((_, json)) = PRESETS.iter().find(|(n, _)| *n == name) else {
        return Err(Error::UnknownPreset {
            name: name.to_string(),
            available: preset_names().join(", "),
        });
    };
    let preset: Preset = serde_json::from_str(json)
        .map_err(|e| Error::json(format!("parsing embedded preset '{name}'"), e))?;
    preset.validate()?;
    Ok(preset)
}
