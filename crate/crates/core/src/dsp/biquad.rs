//! Second-order IIR sections and their cascade.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Margin by which every pole must sit inside the unit circle.
const STABILITY_MARGIN: f64 = 1e-9;

/// One second-order section, coefficients normalized so a0 = 1:
///
/// ```text
/// H(z) = (b0 + b1 z^-1 + b2 z^-2) / (1 + a1 z^-1 + a2 z^-2)
/// ```
///
/// First-order sections are represented with b2 = a2 = 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Biquad {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Biquad {
    /// Builds from unnormalized coefficients, dividing through by `a0`.
    pub fn normalized(b0: f64, b1: f64, b2: f64, a0: f64, a1: f64, a2: f64) -> Self {
        Biquad {
            b0: b0 / a0,
            b1: b1 / a0,
            b2: b2 / a0,
            a1: a1 / a0,
            a2: a2 / a0,
        }
    }

    /// Largest pole magnitude of the section.
    pub fn pole_radius(&self) -> f64 {
        // Poles are roots of z^2 + a1 z + a2.
        let disc = self.a1 * self.a1 - 4.0 * self.a2;
        if disc >= 0.0 {
            let root = disc.sqrt();
            let p1 = (-self.a1 + root) / 2.0;
            let p2 = (-self.a1 - root) / 2.0;
            p1.abs().max(p2.abs())
        } else {
            // Complex-conjugate pair: |p|^2 = product of roots = a2.
            self.a2.sqrt()
        }
    }

    pub fn is_stable(&self) -> bool {
        self.pole_radius() < 1.0 - STABILITY_MARGIN
    }

    /// Magnitude response at normalized angular frequency `omega` (rad/sample),
    /// evaluated directly on the unit circle z = e^{j omega}.
    pub fn magnitude_at_omega(&self, omega: f64) -> f64 {
        let (c1, s1) = ((-omega).cos(), (-omega).sin());
        let (c2, s2) = ((-2.0 * omega).cos(), (-2.0 * omega).sin());
        let num_re = self.b0 + self.b1 * c1 + self.b2 * c2;
        let num_im = self.b1 * s1 + self.b2 * s2;
        let den_re = 1.0 + self.a1 * c1 + self.a2 * c2;
        let den_im = self.a1 * s1 + self.a2 * s2;
        (num_re.hypot(num_im)) / (den_re.hypot(den_im))
    }
}

/// A stable cascade of second-order sections, applied in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiquadCascade {
    sections: Vec<Biquad>,
}

impl BiquadCascade {
    /// Validates stability of every section.
    pub fn new(sections: Vec<Biquad>) -> Result<Self> {
        for (i, s) in sections.iter().enumerate() {
            if !s.is_stable() {
                return Err(Error::InvalidConfig(format!(
                    "filter section {i} is unstable (pole radius {:.12})",
                    s.pole_radius()
                )));
            }
        }
        Ok(BiquadCascade { sections })
    }

    pub fn sections(&self) -> &[Biquad] {
        &self.sections
    }

    /// Causal direct-form-II-transposed evaluation with zero initial state.
    /// Output length equals input length.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if let Some(index) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteSignal { index });
        }
        let mut y = x.to_vec();
        for s in &self.sections {
            let (mut s1, mut s2) = (0.0_f64, 0.0_f64);
            for v in &mut y {
                let xin = *v;
                let out = s.b0 * xin + s1;
                s1 = s.b1 * xin - s.a1 * out + s2;
                s2 = s.b2 * xin - s.a2 * out;
                *v = out;
            }
        }
        Ok(y)
    }

    /// Forward-backward application: zero phase, squared magnitude response.
    pub fn apply_zero_phase(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = self.apply(x)?;
        y.reverse();
        let mut y = self.apply(&y)?;
        y.reverse();
        Ok(y)
    }

    /// Cascade magnitude response at `f_hz` for signals sampled at `fs_hz`.
    pub fn magnitude_at(&self, f_hz: f64, fs_hz: f64) -> f64 {
        let omega = 2.0 * std::f64::consts::PI * f_hz / fs_hz;
        self.sections
            .iter()
            .map(|s| s.magnitude_at_omega(omega))
            .product()
    }

    /// Largest pole magnitude across sections (1 section minimum assumed;
    /// empty cascade reports 0, i.e. trivially stable pass-through).
    pub fn max_pole_radius(&self) -> f64 {
        self.sections
            .iter()
            .map(Biquad::pole_radius)
            .fold(0.0, f64::max)
    }
}

/// Keeps every `factor`-th sample, starting at index 0. `factor` = 1 is the
/// identity. Intended for use after low-pass filtering has removed content
/// above the new Nyquist frequency.
pub fn decimate(x: &[f64], factor: usize) -> Result<Vec<f64>> {
    if factor == 0 {
        return Err(Error::InvalidConfig(
            "decimation factor must be >= 1".to_string(),
        ));
    }
    Ok(x.iter().step_by(factor).copied().collect())
}
