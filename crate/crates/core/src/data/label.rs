//! Action-label taxonomy.
//!
//! A label identifies what the subject did in a trial: which limb and joint
//! moved, the action performed, optionally which digit (finger experiments)
//! and the forearm posture in degrees. The derived `Ord` on label fields (in
//! declaration order) defines the canonical class ordering used everywhere a
//! stable class index is needed.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

macro_rules! token_enum {
    ($name:ident { $($variant:ident => $token:literal),+ $(,)? }) => {
        #[derive(
            Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
        )]
        #[serde(rename_all = "lowercase")]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub fn token(&self) -> &'static str {
                match self {
                    $(Self::$variant => $token),+
                }
            }

            pub fn from_token(s: &str) -> Option<Self> {
                match s {
                    $($token => Some(Self::$variant),)+
                    _ => None,
                }
            }

            pub fn all() -> &'static [Self] {
                &[$(Self::$variant),+]
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.token())
            }
        }
    };
}

token_enum!(Limb {
    Upper => "upper",
    Lower => "lower",
});

token_enum!(Joint {
    Finger => "finger",
    Wrist => "wrist",
    Elbow => "elbow",
    Shoulder => "shoulder",
    Knee => "knee",
    Ankle => "ankle",
});

token_enum!(Action {
    Flexion => "flexion",
    Extension => "extension",
    Abduction => "abduction",
    Adduction => "adduction",
    Supination => "supination",
    Pronation => "pronation",
    Inversion => "inversion",
    Eversion => "eversion",
    Relax => "relax",
});

token_enum!(Digit {
    Thumb => "thumb",
    Index => "index",
    Middle => "middle",
    Ring => "ring",
    Little => "little",
});

/// One movement class. Field order defines the canonical (lexicographic)
/// class ordering; `Option` fields sort `None` first.
#[derive(
    Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct ActionLabel {
    pub limb: Limb,
    pub joint: Joint,
    pub action: Action,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub digit: Option<Digit>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub posture_deg: Option<u16>,
}

impl ActionLabel {
    pub fn new(limb: Limb, joint: Joint, action: Action) -> Self {
        ActionLabel {
            limb,
            joint,
            action,
            digit: None,
            posture_deg: None,
        }
    }

    pub fn with_digit(mut self, digit: Digit) -> Self {
        self.digit = Some(digit);
        self
    }

    pub fn with_posture(mut self, deg: u16) -> Self {
        self.posture_deg = Some(deg);
        self
    }

    /// Enforces taxonomy constraints:
    /// * digit only for finger experiments,
    /// * inversion/eversion only at the ankle,
    /// * posture only for forearm joints (finger, wrist) and one of 0/90/180.
    pub fn validate(&self) -> Result<()> {
        if self.digit.is_some() && self.joint != Joint::Finger {
            return Err(Error::InvalidConfig(format!(
                "label '{self}': digit is only valid for finger experiments"
            )));
        }
        if matches!(self.action, Action::Inversion | Action::Eversion)
            && self.joint != Joint::Ankle
        {
            return Err(Error::InvalidConfig(format!(
                "label '{self}': {} is only valid at the ankle",
                self.action
            )));
        }
        if let Some(deg) = self.posture_deg {
            if !matches!(self.joint, Joint::Finger | Joint::Wrist) {
                return Err(Error::InvalidConfig(format!(
                    "label '{self}': posture applies only to forearm experiments"
                )));
            }
            if !matches!(deg, 0 | 90 | 180) {
                return Err(Error::InvalidConfig(format!(
                    "label '{self}': posture must be 0, 90 or 180 degrees"
                )));
            }
        }
        Ok(())
    }
}

/// Compact one-token form: `limb.joint.action[.digit][@posture]`,
/// e.g. `upper.finger.flexion.index@90`. Used in feature CSV exports and on
/// the CLI for class filters.
impl fmt::Display for ActionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}.{}", self.limb, self.joint, self.action)?;
        if let Some(d) = self.digit {
            write!(f, ".{d}")?;
        }
        if let Some(p) = self.posture_deg {
            write!(f, "@{p}")?;
        }
        Ok(())
    }
}

impl FromStr for ActionLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |what: &str, token: &str| {
            Error::InvalidConfig(format!("label '{s}': unknown {what} '{token}'"))
        };
        let (body, posture) = match s.split_once('@') {
            Some((b, p)) => {
                let deg: u16 = p
                    .parse()
                    .map_err(|_| bad("posture", p))?;
                (b, Some(deg))
            }
            None => (s, None),
        };
        let mut parts = body.split('.');
        let limb = parts
            .next()
            .and_then(Limb::from_token)
            .ok_or_else(|| bad("limb", body))?;
        let joint = parts
            .next()
            .and_then(Joint::from_token)
            .ok_or_else(|| bad("joint", body))?;
        let action = parts
            .next()
            .and_then(Action::from_token)
            .ok_or_else(|| bad("action", body))?;
        let digit = match parts.next() {
            Some(tok) => Some(Digit::from_token(tok).ok_or_else(|| bad("digit", tok))?),
            None => None,
        };
        if parts.next().is_some() {
            return Err(Error::InvalidConfig(format!(
                "label '{s}': too many '.'-separated fields"
            )));
        }
        let label = ActionLabel {
            limb,
            joint,
            action,
            digit,
            posture_deg: posture,
        };
        label.validate()?;
        Ok(label)
    }
}
