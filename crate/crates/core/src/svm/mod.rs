//! Soft-margin SVM trained by sequential minimal optimization, composed
//! one-vs-one for multiclass problems.

mod smo;

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::ActionLabel;
use crate::error::{Error, Result};
use crate::seed;

/// Serialized model format version.
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Linear,
    Rbf,
}

/// Kernel selection. For RBF, `gamma: None` requests the scale heuristic
/// gamma = 1 / (d · mean per-feature variance), resolved once against the
/// training matrix; trained models always store the resolved value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
}

impl KernelSpec {
    pub fn linear() -> Self {
        KernelSpec {
            kind: KernelKind::Linear,
            gamma: None,
        }
    }

    pub fn rbf(gamma: f64) -> Self {
        KernelSpec {
            kind: KernelKind::Rbf,
            gamma: Some(gamma),
        }
    }

    /// RBF with gamma resolved from the training data at fit time.
    pub fn rbf_scale() -> Self {
        KernelSpec {
            kind: KernelKind::Rbf,
            gamma: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(g) = self.gamma {
            if !(g.is_finite() && g > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "kernel gamma must be finite and positive, got {g}"
                )));
            }
        }
        Ok(())
    }

    /// Fixes `gamma` against a concrete training matrix. Degenerate inputs
    /// (zero variance) fall back to gamma = 1/d.
    pub fn resolve(&self, x: &[Vec<f64>]) -> Result<KernelSpec> {
        self.validate()?;
        match (self.kind, self.gamma) {
            (KernelKind::Linear, _) => Ok(KernelSpec::linear()),
            (KernelKind::Rbf, Some(g)) => Ok(KernelSpec::rbf(g)),
            (KernelKind::Rbf, None) => {
                let d = x.first().map_or(0, Vec::len);
                if d == 0 {
                    return Err(Error::InvalidConfig(
                        "cannot resolve RBF gamma on an empty matrix".to_string(),
                    ));
                }
                let n = x.len() as f64;
                let mut mean_var = 0.0;
                for j in 0..d {
                    let mean: f64 = x.iter().map(|r| r[j]).sum::<f64>() / n;
                    let var: f64 = x.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
                    mean_var += var / d as f64;
                }
                let gamma = 1.0 / (d as f64 * mean_var);
                if gamma.is_finite() && gamma > 0.0 {
                    Ok(KernelSpec::rbf(gamma))
                } else {
                    Ok(KernelSpec::rbf(1.0 / d as f64))
                }
            }
        }
    }

    /// Kernel value. RBF requires a resolved gamma.
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match self.kind {
            KernelKind::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
            KernelKind::Rbf => {
                let gamma = self
                    .gamma
                    .expect("RBF kernel must be resolved before evaluation");
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-gamma * d2).exp()
            }
        }
    }
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec::rbf_scale()
    }
}

/// SMO training parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmParams {
    /// Soft-margin penalty.
    pub c: f64,
    pub kernel: KernelSpec,
    /// KKT violation tolerance.
    pub tol: f64,
    /// Consecutive change-free sweeps required to declare convergence.
    pub max_passes: u32,
    /// Hard cap on total sweeps; hitting it clears the converged flag.
    pub max_iter: u32,
    pub seed: u64,
    /// Standardize features (train-set mean/sd) before training; the
    /// scaler is stored with the model. Ratio features rarely need this.
    pub standardize: bool,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            c: 1.0,
            kernel: KernelSpec::default(),
            tol: 1e-3,
            max_passes: 10,
            max_iter: 10_000,
            seed: 0,
            standardize: false,
        }
    }
}

impl SvmParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c.is_finite() && self.c > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "SVM C must be positive, got {}",
                self.c
            )));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "SVM tolerance must be positive, got {}",
                self.tol
            )));
        }
        if self.max_passes == 0 || self.max_iter == 0 {
            return Err(Error::InvalidConfig(
                "max_passes and max_iter must be >= 1".to_string(),
            ));
        }
        self.kernel.validate()
    }
}

/// Per-feature affine standardization fitted on the training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

impl Scaler {
    pub fn fit(x: &[Vec<f64>]) -> Scaler {
        let d = x.first().map_or(0, Vec::len);
        let n = x.len().max(1) as f64;
        let mut means = vec![0.0; d];
        let mut sds = vec![0.0; d];
        for j in 0..d {
            let mean: f64 = x.iter().map(|r| r[j]).sum::<f64>() / n;
            let var: f64 = x.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
            means[j] = mean;
            let sd = var.sqrt();
            sds[j] = if sd > 0.0 { sd } else { 1.0 };
        }
        Scaler { means, sds }
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.means)
            .zip(&self.sds)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }

    pub fn transform(&self, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
        x.iter().map(|r| self.transform_row(r)).collect()
    }
}

/// One trained binary classifier. The decision function is
/// f(x) = Σ alphas_signed[i] · K(sv_i, x) + bias; f ≥ 0 votes
/// `class_pair.0`, f < 0 votes `class_pair.1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryModel {
    /// (class voted for by f ≥ 0, class voted for by f < 0).
    pub class_pair: (usize, usize),
    pub support_vectors: Vec<Vec<f64>>,
    /// Signed dual coefficients α_i·y_i of the support vectors.
    pub alphas_signed: Vec<f64>,
    pub bias: f64,
    /// Kernel with resolved gamma.
    pub kernel: KernelSpec,
    /// False when training hit the sweep cap before reaching
    /// `max_passes` change-free sweeps.
    pub converged: bool,
    /// Sweeps consumed by training.
    pub sweeps: u32,
    /// Final dual objective value (diagnostic; lets external checks compare
    /// against an independent QP solution).
    pub dual_objective: f64,
}

impl BinaryModel {
    pub fn n_features(&self) -> usize {
        self.support_vectors.first().map_or(0, Vec::len)
    }

    pub fn decision(&self, x: &[f64]) -> f64 {
        let mut f = self.bias;
        for (sv, a) in self.support_vectors.iter().zip(&self.alphas_signed) {
            f += a * self.kernel.eval(sv, x);
        }
        f
    }
}

/// One-vs-one ensemble: one binary model per unordered class pair, pairs in
/// lexicographic order over (i, j), i < j.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiClassModel {
    pub classes: Vec<ActionLabel>,
    pub models: Vec<BinaryModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaler: Option<Scaler>,
    pub n_features: usize,
}

impl MultiClassModel {
    /// True when every pairwise training converged.
    pub fn converged(&self) -> bool {
        self.models.iter().all(|m| m.converged)
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }
}

fn validate_matrix(x: &[Vec<f64>]) -> Result<usize> {
    let Some(first) = x.first() else {
        return Err(Error::InvalidConfig("training set is empty".to_string()));
    };
    let d = first.len();
    if d == 0 {
        return Err(Error::InvalidConfig(
            "training rows have zero features".to_string(),
        ));
    }
    for (i, row) in x.iter().enumerate() {
        if row.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: row.len(),
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteSignal { index: i });
        }
    }
    Ok(d)
}

/// Trains one soft-margin binary SVM. `y` entries must be exactly ±1.
/// `class_pair` defaults to (0, 1): f ≥ 0 ↔ y = +1 ↔ class 0.
pub fn train_binary(x: &[Vec<f64>], y: &[f64], p: &SvmParams) -> Result<BinaryModel> {
    p.validate()?;
    validate_matrix(x)?;
    if y.len() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    if let Some(bad) = y.iter().find(|v| **v != 1.0 && **v != -1.0) {
        return Err(Error::InvalidConfig(format!(
            "binary labels must be exactly +1 or -1, got {bad}"
        )));
    }
    if y.iter().all(|&v| v == y[0]) {
        return Err(Error::SingleClassInput { n: y.len() });
    }
    let kernel = p.kernel.resolve(x)?;
    let rng = seed::rng(p.seed, &[seed::tag::SVM_RUN]);
    smo::train(x, y, &kernel, p, (0, 1), rng)
}

/// Trains the full one-vs-one ensemble. `y` holds indices into `classes`;
/// every class must appear in `y`. The kernel's gamma (when using the scale
/// heuristic) and the optional scaler are resolved once on the full matrix,
/// so all pairwise models share one feature geometry.
pub fn train_multiclass(
    x: &[Vec<f64>],
    y: &[usize],
    classes: &[ActionLabel],
    p: &SvmParams,
) -> Result<MultiClassModel> {
    p.validate()?;
    let d = validate_matrix(x)?;
    if y.len() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    let k = classes.len();
    if k < 2 {
        return Err(Error::SingleClassInput { n: x.len() });
    }
    if let Some(&bad) = y.iter().find(|&&c| c >= k) {
        return Err(Error::InvalidConfig(format!(
            "class index {bad} out of range for {k} classes"
        )));
    }

    let scaler = p.standardize.then(|| Scaler::fit(x));
    let scaled: Vec<Vec<f64>>;
    let x_fit: &[Vec<f64>] = match &scaler {
        Some(s) => {
            scaled = s.transform(x);
            &scaled
        }
        None => x,
    };
    let kernel = p.kernel.resolve(x_fit)?;

    let pairs: Vec<(usize, usize)> = (0..k)
        .flat_map(|a| ((a + 1)..k).map(move |b| (a, b)))
        .collect();
    let models: Vec<BinaryModel> = pairs
        .par_iter()
        .map(|&(a, b)| {
            let mut px = Vec::new();
            let mut py = Vec::new();
            for (row, &cls) in x_fit.iter().zip(y) {
                if cls == a {
                    px.push(row.clone());
                    py.push(1.0);
                } else if cls == b {
                    px.push(row.clone());
                    py.push(-1.0);
                }
            }
            if !py.contains(&1.0) || !py.contains(&-1.0) {
                return Err(Error::EmptyPairSide { a, b });
            }
            let rng = seed::rng(p.seed, &[seed::tag::SVM_PAIR, a as u64, b as u64]);
            smo::train(&px, &py, &kernel, p, (a, b), rng)
        })
        .collect::<Result<_>>()?;

    Ok(MultiClassModel {
        classes: classes.to_vec(),
        models,
        scaler,
        n_features: d,
    })
}

/// One-vs-one majority vote. Ties break toward the greatest summed winning
/// decision magnitude among the tied classes, then the lowest class index.
pub fn predict(m: &MultiClassModel, x: &[f64]) -> Result<usize> {
    if x.len() != m.n_features {
        return Err(Error::DimensionMismatch {
            expected: m.n_features,
            found: x.len(),
        });
    }
    let row;
    let x = match &m.scaler {
        Some(s) => {
            row = s.transform_row(x);
            row.as_slice()
        }
        None => x,
    };
    let k = m.n_classes();
    let mut votes = vec![0u32; k];
    let mut strength = vec![0.0f64; k];
    for bm in &m.models {
        let f = bm.decision(x);
        let winner = if f >= 0.0 { bm.class_pair.0 } else { bm.class_pair.1 };
        votes[winner] += 1;
        strength[winner] += f.abs();
    }
    let best_votes = *votes.iter().max().expect("at least one class");
    let mut best: Option<usize> = None;
    for c in 0..k {
        if votes[c] != best_votes {
            continue;
        }
        match best {
            None => best = Some(c),
            Some(b) if strength[c] > strength[b] => best = Some(c),
            _ => {}
        }
    }
    Ok(best.expect("at least one class has max votes"))
}

/// Fraction of rows predicted correctly.
pub fn accuracy(m: &MultiClassModel, x: &[Vec<f64>], y: &[usize]) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::EmptyEvaluation);
    }
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    let mut correct = 0usize;
    for (row, &cls) in x.iter().zip(y) {
        if predict(m, row)? == cls {
            correct += 1;
        }
    }
    Ok(correct as f64 / x.len() as f64)
}

/// Per-class confusion counts: `counts[actual][predicted]`.
pub fn confusion(m: &MultiClassModel, x: &[Vec<f64>], y: &[usize]) -> Result<Vec<Vec<usize>>> {
    if x.is_empty() {
        return Err(Error::EmptyEvaluation);
    }
    let k = m.n_classes();
    let mut counts = vec![vec![0usize; k]; k];
    for (row, &cls) in x.iter().zip(y) {
        if cls >= k {
            return Err(Error::InvalidConfig(format!(
                "class index {cls} out of range for {k} classes"
            )));
        }
        counts[cls][predict(m, row)?] += 1;
    }
    Ok(counts)
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: u32,
    model: MultiClassModel,
}

/// Writes the model as versioned JSON. Numbers round-trip exactly
/// (shortest-representation encoding), so a reloaded model reproduces
/// predictions bit-for-bit.
pub fn save_model(m: &MultiClassModel, path: &Path) -> Result<()> {
    let file = ModelFile {
        version: MODEL_VERSION,
        model: m.clone(),
    };
    let json =
        serde_json::to_string_pretty(&file).map_err(|e| Error::json("serializing model", e))?;
    fs::write(path, json + "\n").map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn load_model(path: &Path) -> Result<MultiClassModel> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::MalformedModel {
        file: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let version = value
        .get("version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| Error::MalformedModel {
            file: path.to_path_buf(),
            reason: "missing integer 'version' field".to_string(),
        })?;
    if version != u64::from(MODEL_VERSION) {
        return Err(Error::UnsupportedModelVersion {
            found: version as u32,
            supported: MODEL_VERSION,
        });
    }
    let file: ModelFile = serde_json::from_value(value).map_err(|e| Error::MalformedModel {
        file: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    Ok(file.model)
}
