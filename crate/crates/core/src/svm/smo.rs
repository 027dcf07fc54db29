//! Sequential minimal optimization for the soft-margin SVM dual:
//!
//! ```text
//! maximize   W(α) = Σ αᵢ − ½ Σᵢⱼ αᵢ αⱼ yᵢ yⱼ K(xᵢ,xⱼ)
//! subject to 0 ≤ αᵢ ≤ C,  Σ αᵢ yᵢ = 0
//! ```
//!
//! Classic two-variable updates: sweep candidates in seeded-shuffled order,
//! pick the partner maximizing |E₁ − E₂| (falling back to a shuffled scan
//! when that step stalls), clip to the box constraints, and keep the bias
//! consistent with the free support vectors. Training stops after
//! `max_passes` consecutive sweeps without a single change, or at the
//! `max_iter` sweep cap (which clears the converged flag). The reported
//! bias is then recomputed from the final alphas (free-vector average, or
//! the KKT-interval midpoint when every alpha sits on the box) so that the
//! model does not depend on the incidental state of the last update.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha12Rng;

use crate::error::Result;
use crate::svm::{BinaryModel, KernelSpec, SvmParams};

/// Threshold for "no meaningful alpha movement".
const STEP_EPS: f64 = 1e-12;

struct Gram {
    k: Vec<f64>,
    n: usize,
}

impl Gram {
    fn new(x: &[Vec<f64>], kernel: &KernelSpec) -> Gram {
        let n = x.len();
        let mut k = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = kernel.eval(&x[i], &x[j]);
                k[i * n + j] = v;
                k[j * n + i] = v;
            }
        }
        Gram { k, n }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.k[i * self.n + j]
    }
}

struct Solver<'a> {
    gram: Gram,
    y: &'a [f64],
    alphas: Vec<f64>,
    bias: f64,
    c: f64,
    tol: f64,
}

impl Solver<'_> {
    /// Decision value f(xᵢ) under the current α, b.
    fn f(&self, i: usize) -> f64 {
        let mut acc = self.bias;
        for (j, &a) in self.alphas.iter().enumerate() {
            if a > 0.0 {
                acc += a * self.y[j] * self.gram.at(i, j);
            }
        }
        acc
    }

    fn error(&self, i: usize) -> f64 {
        self.f(i) - self.y[i]
    }

    fn violates_kkt(&self, i: usize, e_i: f64) -> bool {
        let r = e_i * self.y[i];
        (r < -self.tol && self.alphas[i] < self.c - STEP_EPS)
            || (r > self.tol && self.alphas[i] > STEP_EPS)
    }

    /// Full dual objective W(α); also used to resolve degenerate (η ≤ 0)
    /// steps by direct evaluation at the box endpoints.
    fn objective_with(&self, overrides: &[(usize, f64)]) -> f64 {
        let a = |i: usize| {
            overrides
                .iter()
                .find(|(j, _)| *j == i)
                .map_or(self.alphas[i], |(_, v)| *v)
        };
        let n = self.y.len();
        let mut linear = 0.0;
        let mut quad = 0.0;
        for i in 0..n {
            let ai = a(i);
            if ai == 0.0 {
                continue;
            }
            linear += ai;
            for j in 0..n {
                let aj = a(j);
                if aj != 0.0 {
                    quad += ai * aj * self.y[i] * self.y[j] * self.gram.at(i, j);
                }
            }
        }
        linear - 0.5 * quad
    }

    fn objective(&self) -> f64 {
        self.objective_with(&[])
    }

    /// Recomputes the bias from the final alphas so that predictions are a
    /// function of the dual solution alone rather than of whichever pair
    /// happened to move last. Free support vectors pin b exactly (average
    /// of yᵢ − Σⱼ αⱼyⱼK(xⱼ,xᵢ) over them). With every alpha on the box the
    /// KKT conditions only bound b to an interval — (y=+1, α=0) and
    /// (y=−1, α=C) from below, the opposite corners from above — and the
    /// interval midpoint is the canonical choice.
    fn canonical_bias(&self) -> f64 {
        let eps = self.c * 1e-8;
        let margin = |i: usize| self.f(i) - self.bias;
        let mut free_sum = 0.0;
        let mut free_n = 0usize;
        for i in 0..self.y.len() {
            if self.alphas[i] > eps && self.alphas[i] < self.c - eps {
                free_sum += self.y[i] - margin(i);
                free_n += 1;
            }
        }
        if free_n > 0 {
            return free_sum / free_n as f64;
        }
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for i in 0..self.y.len() {
            let v = self.y[i] - margin(i);
            if (self.y[i] > 0.0) == (self.alphas[i] <= eps) {
                lo = lo.max(v);
            } else {
                hi = hi.min(v);
            }
        }
        match (lo.is_finite(), hi.is_finite()) {
            (true, true) => (lo + hi) / 2.0,
            (true, false) => lo,
            (false, true) => hi,
            (false, false) => self.bias,
        }
    }

    /// Attempts a joint update of (αᵢ, αⱼ). Returns true when alphas moved.
    fn take_step(&mut self, i: usize, j: usize, e_i: f64) -> bool {
        if i == j {
            return false;
        }
        let e_j = self.error(j);
        let (a_i, a_j) = (self.alphas[i], self.alphas[j]);
        let (y_i, y_j) = (self.y[i], self.y[j]);
        let s = y_i * y_j;
        let (lo, hi) = if s < 0.0 {
            ((a_j - a_i).max(0.0), (self.c + a_j - a_i).min(self.c))
        } else {
            ((a_i + a_j - self.c).max(0.0), (a_i + a_j).min(self.c))
        };
        if hi - lo < STEP_EPS {
            return false;
        }
        let k_ii = self.gram.at(i, i);
        let k_jj = self.gram.at(j, j);
        let k_ij = self.gram.at(i, j);
        let eta = k_ii + k_jj - 2.0 * k_ij;

        let mut a_j_new = if eta > 1e-15 {
            (a_j + y_j * (e_i - e_j) / eta).clamp(lo, hi)
        } else {
            // Flat (or numerically flat) direction: evaluate the dual at both
            // endpoints and take the better one.
            let at = |v: f64| {
                let a_i_v = a_i + s * (a_j - v);
                self.objective_with(&[(i, a_i_v), (j, v)])
            };
            let w_lo = at(lo);
            let w_hi = at(hi);
            if w_lo > w_hi + STEP_EPS {
                lo
            } else if w_hi > w_lo + STEP_EPS {
                hi
            } else {
                return false;
            }
        };
        // Snap to the box to avoid numerical dust at the bounds.
        if a_j_new < STEP_EPS {
            a_j_new = 0.0;
        } else if a_j_new > self.c - STEP_EPS {
            a_j_new = self.c;
        }
        if (a_j_new - a_j).abs() < STEP_EPS {
            return false;
        }
        let mut a_i_new = a_i + s * (a_j - a_j_new);
        if a_i_new < STEP_EPS {
            a_i_new = 0.0;
        } else if a_i_new > self.c - STEP_EPS {
            a_i_new = self.c;
        }

        // Keep f(x) = y on whichever updated point stays strictly inside the
        // box; average when both sit on a bound.
        let d_i = y_i * (a_i_new - a_i);
        let d_j = y_j * (a_j_new - a_j);
        let b1 = self.bias - e_i - d_i * k_ii - d_j * k_ij;
        let b2 = self.bias - e_j - d_i * k_ij - d_j * k_jj;
        let i_free = a_i_new > 0.0 && a_i_new < self.c;
        let j_free = a_j_new > 0.0 && a_j_new < self.c;
        self.bias = if i_free {
            b1
        } else if j_free {
            b2
        } else {
            (b1 + b2) / 2.0
        };
        self.alphas[i] = a_i_new;
        self.alphas[j] = a_j_new;
        true
    }

    /// Examines one candidate: KKT check, best-partner step, shuffled
    /// fallback scan. Returns true when a step was taken.
    fn examine(&mut self, i: usize, order_scratch: &mut Vec<usize>, rng: &mut ChaCha12Rng) -> bool {
        let e_i = self.error(i);
        if !self.violates_kkt(i, e_i) {
            return false;
        }
        // Second-choice heuristic: maximize |E_i - E_j| (ties -> lowest j).
        let mut best_j = None;
        let mut best_gap = -1.0;
        for j in 0..self.y.len() {
            if j == i {
                continue;
            }
            let gap = (e_i - self.error(j)).abs();
            if gap > best_gap {
                best_gap = gap;
                best_j = Some(j);
            }
        }
        if let Some(j) = best_j {
            if self.take_step(i, j, e_i) {
                return true;
            }
        }
        // Fallback: scan all partners in a fresh shuffled order.
        order_scratch.clear();
        order_scratch.extend(0..self.y.len());
        order_scratch.shuffle(rng);
        for idx in 0..order_scratch.len() {
            let j = order_scratch[idx];
            if j != i && self.take_step(i, j, e_i) {
                return true;
            }
        }
        false
    }
}

/// Runs SMO to completion and packages the support vectors. `kernel` must
/// already be resolved (concrete gamma for RBF).
pub(crate) fn train(
    x: &[Vec<f64>],
    y: &[f64],
    kernel: &KernelSpec,
    p: &SvmParams,
    class_pair: (usize, usize),
    mut rng: ChaCha12Rng,
) -> Result<BinaryModel> {
    let mut solver = Solver {
        gram: Gram::new(x, kernel),
        y,
        alphas: vec![0.0; x.len()],
        bias: 0.0,
        c: p.c,
        tol: p.tol,
    };

    let mut order: Vec<usize> = (0..x.len()).collect();
    let mut scratch: Vec<usize> = Vec::with_capacity(x.len());
    let mut clean_sweeps = 0u32;
    let mut sweeps = 0u32;
    let mut converged = false;
    while sweeps < p.max_iter {
        sweeps += 1;
        order.shuffle(&mut rng);
        let mut changed = 0usize;
        for idx in 0..order.len() {
            let i = order[idx];
            if solver.examine(i, &mut scratch, &mut rng) {
                changed += 1;
            }
        }
        if changed == 0 {
            clean_sweeps += 1;
            if clean_sweeps >= p.max_passes {
                converged = true;
                break;
            }
        } else {
            clean_sweeps = 0;
        }
    }

    let dual_objective = solver.objective();
    let bias = solver.canonical_bias();
    let mut support_vectors = Vec::new();
    let mut alphas_signed = Vec::new();
    for (i, &a) in solver.alphas.iter().enumerate() {
        if a > 0.0 {
            support_vectors.push(x[i].clone());
            alphas_signed.push(a * y[i]);
        }
    }
    Ok(BinaryModel {
        class_pair,
        support_vectors,
        alphas_signed,
        bias,
        kernel: *kernel,
        converged,
        sweeps,
        dual_objective,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    fn run(x: &[Vec<f64>], y: &[f64], p: &SvmParams) -> BinaryModel {
        let kernel = p.kernel.resolve(x).unwrap();
        let rng = seed::rng(p.seed, &[seed::tag::SVM_RUN]);
        train(x, y, &kernel, p, (0, 1), rng).unwrap()
    }

    #[test]
    fn xor_with_rbf_is_fit_exactly() {
        let x = vec![
            vec![0.0, 0.0],
            vec![1.0, 1.0],
            vec![0.0, 1.0],
            vec![1.0, 0.0],
        ];
        let y = vec![1.0, 1.0, -1.0, -1.0];
        let p = SvmParams {
            kernel: KernelSpec::rbf(1.0),
            c: 10.0,
            ..SvmParams::default()
        };
        let m = run(&x, &y, &p);
        assert!(m.converged);
        for (row, label) in x.iter().zip(&y) {
            assert_eq!(m.decision(row) >= 0.0, *label > 0.0, "row {row:?}");
        }
    }

    #[test]
    fn alphas_stay_in_the_box_and_balance() {
        let x: Vec<Vec<f64>> = (0..14)
            .map(|i| {
                let t = i as f64;
                vec![(t * 0.83).sin() * 2.0, (t * 1.7).cos() * 2.0]
            })
            .collect();
        let y: Vec<f64> = (0..14).map(|i| if i % 3 == 0 { 1.0 } else { -1.0 }).collect();
        let p = SvmParams {
            kernel: KernelSpec::rbf(0.5),
            c: 1.5,
            ..SvmParams::default()
        };
        let kernel = p.kernel.resolve(&x).unwrap();
        let rng = seed::rng(7, &[seed::tag::SVM_RUN]);
        let mut solver = Solver {
            gram: Gram::new(&x, &kernel),
            y: &y,
            alphas: vec![0.0; x.len()],
            bias: 0.0,
            c: p.c,
            tol: p.tol,
        };
        let mut order: Vec<usize> = (0..x.len()).collect();
        let mut scratch = Vec::new();
        let mut rng = rng;
        for _ in 0..200 {
            order.shuffle(&mut rng);
            for idx in 0..order.len() {
                let i = order[idx];
                solver.examine(i, &mut scratch, &mut rng);
            }
        }
        let balance: f64 = solver
            .alphas
            .iter()
            .zip(&y)
            .map(|(a, yy)| a * yy)
            .sum();
        assert!(balance.abs() < 1e-9, "equality constraint drifted: {balance}");
        for a in &solver.alphas {
            assert!(*a >= -1e-12 && *a <= p.c + 1e-12);
        }
    }

    #[test]
    fn support_vector_margins_respect_kkt() {
        let x = vec![
            vec![0.0, 0.2],
            vec![0.3, 0.0],
            vec![0.1, 0.1],
            vec![3.0, 3.2],
            vec![3.3, 3.0],
            vec![3.1, 3.1],
        ];
        let y = vec![1.0, 1.0, 1.0, -1.0, -1.0, -1.0];
        let p = SvmParams {
            kernel: KernelSpec::linear(),
            ..SvmParams::default()
        };
        let m = run(&x, &y, &p);
        // Free support vectors must sit on the margin within tolerance.
        for (sv, a) in m.support_vectors.iter().zip(&m.alphas_signed) {
            let alpha = a.abs();
            if alpha > 1e-9 && alpha < p.c - 1e-9 {
                let yv = a.signum();
                let margin = yv * m.decision(sv);
                assert!((margin - 1.0).abs() < 5.0 * p.tol, "margin {margin}");
            }
        }
    }

    #[test]
    fn identical_seed_identical_solution() {
        let x: Vec<Vec<f64>> = (0..10)
            .map(|i| vec![(i as f64 * 1.1).sin(), (i as f64 * 0.3).cos()])
            .collect();
        let y: Vec<f64> = (0..10).map(|i| if i < 5 { 1.0 } else { -1.0 }).collect();
        let p = SvmParams {
            seed: 99,
            ..SvmParams::default()
        };
        let a = run(&x, &y, &p);
        let b = run(&x, &y, &p);
        assert_eq!(a, b);
    }

    #[test]
    fn sweep_cap_reports_nonconvergence() {
        let x = vec![
            vec![0.0, 0.0],
            vec![1.0, 1.0],
            vec![0.0, 1.0],
            vec![1.0, 0.0],
        ];
        let y = vec![1.0, 1.0, -1.0, -1.0];
        let p = SvmParams {
            kernel: KernelSpec::rbf(1.0),
            c: 10.0,
            max_iter: 1,
            ..SvmParams::default()
        };
        let m = run(&x, &y, &p);
        assert!(!m.converged);
        assert_eq!(m.sweeps, 1);
    }
}
