//! Digital front end: IIR notch + bandpass filtering and moving-window RMS.
//!
//! The chain mirrors a real-time firmware stage: a narrow 50 Hz notch to
//! reject mains interference, then a 30–300 Hz Butterworth bandpass, then a
//! sliding 20 ms RMS envelope. Filters are causal by default; an optional
//! forward-backward mode gives zero phase for offline analysis.

mod biquad;
mod design;
mod rms;

pub use biquad::{decimate, Biquad, BiquadCascade};
pub use design::{design_bandpass, design_highpass, design_lowpass, design_notch};
pub use rms::{moving_rms, RmsParams, RmsSeries};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Specification of the full filtering stage.
///
/// `order` is the total bandpass order; it is split evenly between the
/// high-pass and low-pass Butterworth halves (order 4 = HP 2 + LP 2),
/// matching the usual "Nth-order bandpass" convention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterSpec {
    pub notch_hz: f64,
    pub notch_q: f64,
    /// Disable to observe raw mains interference downstream.
    pub notch_enabled: bool,
    pub band_lo_hz: f64,
    pub band_hi_hz: f64,
    /// Total bandpass order; even, ≥ 2.
    pub order: u32,
    pub sample_rate_hz: f64,
    /// Apply the cascade forward and backward (squares the magnitude
    /// response, cancels phase). Off by default: the modeled firmware
    /// stage is causal.
    pub zero_phase: bool,
}

impl Default for FilterSpec {
    fn default() -> Self {
        FilterSpec {
            notch_hz: 50.0,
            notch_q: 35.0,
            notch_enabled: true,
            band_lo_hz: 30.0,
            band_hi_hz: 300.0,
            order: 4,
            sample_rate_hz: 20_000.0,
            zero_phase: false,
        }
    }
}

impl FilterSpec {
    pub fn for_sample_rate(sample_rate_hz: f64) -> Self {
        FilterSpec {
            sample_rate_hz,
            ..FilterSpec::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let nyquist = self.sample_rate_hz / 2.0;
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "sample_rate_hz must be positive, got {}",
                self.sample_rate_hz
            )));
        }
        if !(self.band_lo_hz > 0.0 && self.band_lo_hz < self.band_hi_hz && self.band_hi_hz < nyquist)
        {
            return Err(Error::InvalidConfig(format!(
                "band edges must satisfy 0 < lo < hi < fs/2, got lo {} hi {} fs {}",
                self.band_lo_hz, self.band_hi_hz, self.sample_rate_hz
            )));
        }
        if self.notch_enabled && !(self.notch_hz > 0.0 && self.notch_hz < nyquist) {
            return Err(Error::InvalidConfig(format!(
                "notch frequency must lie in (0, fs/2), got {} at fs {}",
                self.notch_hz, self.sample_rate_hz
            )));
        }
        if self.notch_enabled && !(self.notch_q > 0.0 && self.notch_q.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "notch Q must be positive, got {}",
                self.notch_q
            )));
        }
        if self.order < 2 || self.order % 2 != 0 {
            return Err(Error::InvalidConfig(format!(
                "bandpass order must be even and >= 2, got {}",
                self.order
            )));
        }
        Ok(())
    }

    /// Designs the complete cascade: notch (when enabled) followed by the
    /// bandpass sections.
    pub fn build(&self) -> Result<BiquadCascade> {
        self.validate()?;
        let mut sections = Vec::new();
        if self.notch_enabled {
            sections.extend_from_slice(
                design_notch(self.notch_hz, self.sample_rate_hz, self.notch_q)?.sections(),
            );
        }
        sections.extend_from_slice(
            design_bandpass(
                self.band_lo_hz,
                self.band_hi_hz,
                self.sample_rate_hz,
                self.order,
            )?
            .sections(),
        );
        BiquadCascade::new(sections)
    }

    /// Filters one channel according to this spec (causal or zero-phase).
    pub fn process(&self, x: &[f64]) -> Result<Vec<f64>> {
        let cascade = self.build()?;
        if self.zero_phase {
            cascade.apply_zero_phase(x)
        } else {
            cascade.apply(x)
        }
    }
}
