//! Shared test oracles, implemented independently of the library: filter
//! magnitudes are measured in the time domain, spectra come from a direct
//! Goertzel recurrence, and the SVM dual is solved by derivative-free
//! hill-climbing — so agreement with the library is evidence, not
//! tautology.

#![allow(dead_code)] // each test binary uses a subset of these oracles

use rand::Rng;
use rand_chacha::ChaCha12Rng;

/// Steady-state amplitude gain of `filter` at `f_hz`, measured by pushing a
/// long unit sinusoid through it and reading the output envelope after the
/// transient has died out.
pub fn measured_gain<F>(filter: F, f_hz: f64, fs_hz: f64) -> f64
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let settle_s = 4.0;
    let measure_s = 1.0;
    let n = ((settle_s + measure_s) * fs_hz) as usize;
    let x: Vec<f64> = (0..n)
        .map(|i| (2.0 * std::f64::consts::PI * f_hz * i as f64 / fs_hz).sin())
        .collect();
    let y = filter(&x);
    let tail = &y[(settle_s * fs_hz) as usize..];
    // Amplitude via RMS over an integer number of cycles (robust to phase).
    let cycles = (measure_s * f_hz).floor().max(1.0);
    let span = ((cycles / f_hz) * fs_hz).round() as usize;
    let seg = &tail[..span.min(tail.len())];
    let rms = (seg.iter().map(|v| v * v).sum::<f64>() / seg.len() as f64).sqrt();
    rms * std::f64::consts::SQRT_2
}

/// Power of `x` at frequency `f_hz` via the Goertzel recurrence, normalized
/// so a unit-amplitude sinusoid at the bin yields ≈ 0.5 (its mean power).
pub fn goertzel_power(x: &[f64], f_hz: f64, fs_hz: f64) -> f64 {
    let n = x.len() as f64;
    let omega = 2.0 * std::f64::consts::PI * f_hz / fs_hz;
    let coeff = 2.0 * omega.cos();
    let (mut s1, mut s2) = (0.0, 0.0);
    for &v in x {
        let s0 = v + coeff * s1 - s2;
        s2 = s1;
        s1 = s0;
    }
    let power = s1 * s1 + s2 * s2 - coeff * s1 * s2;
    // |X(f)|² normalized to per-sample mean power.
    power / (n * n) * 2.0
}

/// Box-constrained SVM dual solved by annealed pairwise hill-climbing:
/// repeatedly tries moving mass δ between coordinate pairs (preserving
/// Σ αᵢ yᵢ = 0 and 0 ≤ α ≤ C), halving δ when no move improves the
/// objective. The dual is concave, so this converges to the optimum for
/// the small instances used in tests.
pub struct GridQp {
    pub alphas: Vec<f64>,
    pub objective: f64,
    pub bias: f64,
}

pub fn grid_qp(x: &[Vec<f64>], y: &[f64], c: f64, kernel: impl Fn(&[f64], &[f64]) -> f64) -> GridQp {
    let n = x.len();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            k[i * n + j] = kernel(&x[i], &x[j]);
        }
    }
    let objective = |a: &[f64]| -> f64 {
        let mut lin = 0.0;
        let mut quad = 0.0;
        for i in 0..n {
            lin += a[i];
            for j in 0..n {
                quad += a[i] * a[j] * y[i] * y[j] * k[i * n + j];
            }
        }
        lin - 0.5 * quad
    };

    let mut alphas = vec![0.0; n];
    let mut best = objective(&alphas);
    let mut delta = c / 8.0;
    while delta > 1e-7 * c {
        let mut improved = true;
        while improved {
            improved = false;
            for i in 0..n {
                for j in 0..n {
                    if i == j {
                        continue;
                    }
                    // Move αᵢ by ±δ and compensate αⱼ to keep Σ α y fixed.
                    for sign in [1.0, -1.0] {
                        let ai = alphas[i] + sign * delta;
                        let aj = alphas[j] - sign * delta * y[i] * y[j];
                        if !(0.0..=c).contains(&ai) || !(0.0..=c).contains(&aj) {
                            continue;
                        }
                        let (old_i, old_j) = (alphas[i], alphas[j]);
                        alphas[i] = ai;
                        alphas[j] = aj;
                        let obj = objective(&alphas);
                        if obj > best + 1e-15 {
                            best = obj;
                            improved = true;
                        } else {
                            alphas[i] = old_i;
                            alphas[j] = old_j;
                        }
                    }
                }
            }
        }
        delta /= 2.0;
    }

    // Bias from the KKT conditions on free support vectors; fall back to
    // the midpoint rule when every α sits on the box.
    let f_no_bias = |i: usize| -> f64 {
        (0..n).map(|j| alphas[j] * y[j] * k[i * n + j]).sum::<f64>()
    };
    let free: Vec<usize> = (0..n)
        .filter(|&i| alphas[i] > 1e-8 * c && alphas[i] < c * (1.0 - 1e-8))
        .collect();
    let bias = if free.is_empty() {
        // With every α on the box the KKT conditions pin b to an interval:
        //   α=0  requires yᵢ(g(xᵢ)+b) ≥ 1,  α=C requires yᵢ(g(xᵢ)+b) ≤ 1,
        // so (y=+1, α=0) and (y=−1, α=C) give lower bounds b ≥ yᵢ − g(xᵢ),
        // while (y=+1, α=C) and (y=−1, α=0) give upper bounds. Take the
        // interval midpoint.
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for i in 0..n {
            let v = y[i] - f_no_bias(i);
            if (y[i] > 0.0 && alphas[i] < c / 2.0) || (y[i] < 0.0 && alphas[i] > c / 2.0) {
                lo = lo.max(v);
            } else {
                hi = hi.min(v);
            }
        }
        if lo.is_finite() && hi.is_finite() {
            (lo + hi) / 2.0
        } else {
            0.0
        }
    } else {
        free.iter().map(|&i| y[i] - f_no_bias(i)).sum::<f64>() / free.len() as f64
    };

    GridQp {
        alphas,
        objective: best,
        bias,
    }
}

/// Uniform point cloud in [-1, 1]^d with labels from a deterministic rng,
/// guaranteeing at least one point per class.
pub fn random_binary_instance(
    rng: &mut ChaCha12Rng,
    n: usize,
    d: usize,
) -> (Vec<Vec<f64>>, Vec<f64>) {
    loop {
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.random_range(-1.0..=1.0)).collect())
            .collect();
        let y: Vec<f64> = (0..n)
            .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
            .collect();
        if y.iter().any(|&v| v > 0.0) && y.iter().any(|&v| v < 0.0) {
            return (x, y);
        }
    }
}

pub fn rbf(gamma: f64) -> impl Fn(&[f64], &[f64]) -> f64 {
    move |a: &[f64], b: &[f64]| {
        let d2: f64 = a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum();
        (-gamma * d2).exp()
    }
}

pub fn linear_kernel(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}
