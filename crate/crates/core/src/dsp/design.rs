//! Filter design: RBJ-cookbook biquads via bilinear transform with
//! frequency pre-warping at the design frequency.

use std::f64::consts::PI;

use crate::dsp::biquad::{Biquad, BiquadCascade};
use crate::error::{Error, Result};

fn check_band_edge(name: &str, f: f64, fs: f64) -> Result<()> {
    if !(f.is_finite() && f > 0.0 && f < fs / 2.0) {
        return Err(Error::InvalidConfig(format!(
            "{name} frequency must lie in (0, fs/2); got {f} Hz at fs {fs} Hz"
        )));
    }
    Ok(())
}

/// Narrow band-stop at `f0`. Zeros sit exactly on the unit circle at ±f0,
/// giving unity gain at DC and Nyquist and a true null at f0; `q` sets the
/// −3 dB notch width to roughly f0/q.
pub fn design_notch(f0: f64, fs: f64, q: f64) -> Result<BiquadCascade> {
    check_band_edge("notch", f0, fs)?;
    if !(q.is_finite() && q > 0.0) {
        return Err(Error::InvalidConfig(format!("notch Q must be positive, got {q}")));
    }
    let w0 = 2.0 * PI * f0 / fs;
    let alpha = w0.sin() / (2.0 * q);
    let cosw = w0.cos();
    let section = Biquad::normalized(1.0, -2.0 * cosw, 1.0, 1.0 + alpha, -2.0 * cosw, 1.0 - alpha);
    BiquadCascade::new(vec![section])
}

/// One second-order low-pass section with the given quality factor.
fn lowpass_section(fc: f64, fs: f64, q: f64) -> Biquad {
    let w0 = 2.0 * PI * fc / fs;
    let alpha = w0.sin() / (2.0 * q);
    let cosw = w0.cos();
    Biquad::normalized(
        (1.0 - cosw) / 2.0,
        1.0 - cosw,
        (1.0 - cosw) / 2.0,
        1.0 + alpha,
        -2.0 * cosw,
        1.0 - alpha,
    )
}

/// One second-order high-pass section with the given quality factor.
fn highpass_section(fc: f64, fs: f64, q: f64) -> Biquad {
    let w0 = 2.0 * PI * fc / fs;
    let alpha = w0.sin() / (2.0 * q);
    let cosw = w0.cos();
    Biquad::normalized(
        (1.0 + cosw) / 2.0,
        -(1.0 + cosw),
        (1.0 + cosw) / 2.0,
        1.0 + alpha,
        -2.0 * cosw,
        1.0 - alpha,
    )
}

/// First-order sections for odd Butterworth orders (b2 = a2 = 0).
fn first_order(fc: f64, fs: f64, highpass: bool) -> Biquad {
    let k = (PI * fc / fs).tan();
    let a1 = (k - 1.0) / (k + 1.0);
    if highpass {
        Biquad {
            b0: 1.0 / (k + 1.0),
            b1: -1.0 / (k + 1.0),
            b2: 0.0,
            a1,
            a2: 0.0,
        }
    } else {
        Biquad {
            b0: k / (k + 1.0),
            b1: k / (k + 1.0),
            b2: 0.0,
            a1,
            a2: 0.0,
        }
    }
}

/// Quality factors of the biquad sections of an order-`n` Butterworth
/// filter: Q_k = 1 / (2 sin(pi (2k+1) / (2n))). For odd `n` the remaining
/// real pole becomes a first-order section.
fn butterworth_qs(n: u32) -> Vec<f64> {
    (0..n / 2)
        .map(|k| {
            let theta = PI * (2 * k + 1) as f64 / (2.0 * n as f64);
            1.0 / (2.0 * theta.sin())
        })
        .collect()
}

fn butterworth(fc: f64, fs: f64, order: u32, highpass: bool) -> Result<BiquadCascade> {
    check_band_edge(if highpass { "high-pass cutoff" } else { "low-pass cutoff" }, fc, fs)?;
    if order == 0 {
        return Err(Error::InvalidConfig("filter order must be >= 1".to_string()));
    }
    let mut sections: Vec<Biquad> = butterworth_qs(order)
        .into_iter()
        .map(|q| {
            if highpass {
                highpass_section(fc, fs, q)
            } else {
                lowpass_section(fc, fs, q)
            }
        })
        .collect();
    if order % 2 == 1 {
        sections.push(first_order(fc, fs, highpass));
    }
    BiquadCascade::new(sections)
}

/// Butterworth low-pass of the given order (−3 dB at `fc` by construction).
pub fn design_lowpass(fc: f64, fs: f64, order: u32) -> Result<BiquadCascade> {
    butterworth(fc, fs, order, false)
}

/// Butterworth high-pass of the given order (−3 dB at `fc` by construction).
pub fn design_highpass(fc: f64, fs: f64, order: u32) -> Result<BiquadCascade> {
    butterworth(fc, fs, order, true)
}

/// Butterworth band-pass realized as a high-pass/low-pass cascade. `order`
/// counts total poles and is split evenly: order 4 = HP 2 + LP 2, giving
/// −3 dB (to within the far-edge droop, < 0.01 dB here) at both edges.
pub fn design_bandpass(lo: f64, hi: f64, fs: f64, order: u32) -> Result<BiquadCascade> {
    if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo < hi && hi < fs / 2.0) {
        return Err(Error::InvalidConfig(format!(
            "band edges must satisfy 0 < lo < hi < fs/2, got lo {lo} hi {hi} fs {fs}"
        )));
    }
    if order < 2 || order % 2 != 0 {
        return Err(Error::InvalidConfig(format!(
            "bandpass order must be even and >= 2, got {order}"
        )));
    }
    let half = order / 2;
    let mut sections = design_highpass(lo, fs, half)?.sections().to_vec();
    sections.extend_from_slice(design_lowpass(hi, fs, half)?.sections());
    BiquadCascade::new(sections)
}

#[cfg(test)]
mod tests {
    use super::*;

    const FS: f64 = 20_000.0;

    #[test]
    fn notch_unity_at_dc_and_nyquist_null_at_f0() {
        let n = design_notch(50.0, FS, 35.0).unwrap();
        assert!((n.magnitude_at(0.0, FS) - 1.0).abs() < 1e-12);
        assert!((n.magnitude_at(FS / 2.0, FS) - 1.0).abs() < 1e-12);
        // Zeros sit on the unit circle: the null is exact up to rounding.
        assert!(n.magnitude_at(50.0, FS) < 1e-10);
    }

    #[test]
    fn notch_rejects_out_of_range() {
        assert!(design_notch(FS / 2.0, FS, 35.0).is_err());
        assert!(design_notch(-5.0, FS, 35.0).is_err());
        assert!(design_notch(50.0, FS, 0.0).is_err());
    }

    #[test]
    fn butterworth_cutoff_is_exactly_3db_for_all_orders() {
        for order in 1..=8 {
            let lp = design_lowpass(300.0, FS, order).unwrap();
            let hp = design_highpass(30.0, FS, order).unwrap();
            let target = std::f64::consts::FRAC_1_SQRT_2;
            assert!(
                (lp.magnitude_at(300.0, FS) - target).abs() < 1e-9,
                "LP order {order}"
            );
            assert!(
                (hp.magnitude_at(30.0, FS) - target).abs() < 1e-9,
                "HP order {order}"
            );
        }
    }

    #[test]
    fn butterworth_monotone_rolloff() {
        let lp = design_lowpass(300.0, FS, 4).unwrap();
        let mags: Vec<f64> = (1..40)
            .map(|i| lp.magnitude_at(i as f64 * 100.0, FS))
            .collect();
        for pair in mags.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-12, "not monotone: {pair:?}");
        }
    }

    #[test]
    fn bandpass_structure_and_edges() {
        let bp = design_bandpass(30.0, 300.0, FS, 4).unwrap();
        assert_eq!(bp.sections().len(), 2);
        let target = std::f64::consts::FRAC_1_SQRT_2;
        // Far-apart edges: each edge sees the other half's droop of
        // ~(1/10)^4 / 2, i.e. < 1e-4 relative.
        assert!((bp.magnitude_at(30.0, FS) - target).abs() < 1e-3);
        assert!((bp.magnitude_at(300.0, FS) - target).abs() < 1e-3);
        assert!(bp.magnitude_at(0.0, FS) < 1e-12);
        assert!(bp.magnitude_at(FS / 2.0, FS) < 1e-9);
    }

    #[test]
    fn bandpass_rejects_bad_args() {
        assert!(design_bandpass(300.0, 30.0, FS, 4).is_err());
        assert!(design_bandpass(30.0, 11_000.0, FS, 4).is_err());
        assert!(design_bandpass(30.0, 300.0, FS, 3).is_err());
        assert!(design_bandpass(30.0, 300.0, FS, 0).is_err());
    }

    #[test]
    fn all_designed_sections_are_stable_with_margin() {
        let specs: Vec<BiquadCascade> = vec![
            design_notch(50.0, FS, 35.0).unwrap(),
            design_bandpass(30.0, 300.0, FS, 4).unwrap(),
            design_lowpass(9_000.0, FS, 7).unwrap(),
            design_highpass(1.0, FS, 6).unwrap(),
        ];
        for c in specs {
            assert!(c.max_pole_radius() < 1.0 - 1e-9);
        }
    }

    #[test]
    fn butterworth_q_values_match_tables() {
        // Classic table values for N = 4: 0.5412, 1.3066.
        let qs = butterworth_qs(4);
        assert!((qs[0] - 1.306_562_964_876_376_4).abs() < 1e-12);
        assert!((qs[1] - 0.541_196_100_146_196_98).abs() < 1e-12);
        // N = 2: single section at 1/sqrt(2).
        let qs = butterworth_qs(2);
        assert!((qs[0] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
    }
}
