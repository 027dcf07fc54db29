//! Exhaustive channel-subset × normalizer accuracy search.
//!
//! For every channel subset up to `max_k`, every member channel is tried as
//! the ratio normalizer; each (subset, normalizer) pair is scored by mean
//! test accuracy over `repeats` independent stratified re-splits. The best
//! normalizer wins the subset, and the best subset of each size forms the
//! best-per-k frontier. Size-1 subsets use the raw peak feature (a ratio
//! would be degenerate there).
//!
//! All randomness is derived from the config seeds plus the (subset,
//! normalizer, repeat) coordinates, so results are identical no matter how
//! the subset jobs are scheduled.

use std::io::Write as IoWrite;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{
    stratified_split_indices, validate_subset, ActionLabel, Dataset, SplitSpec,
};
use crate::dsp::{FilterSpec, RmsParams};
use crate::error::{Error, Result};
use crate::features::{design_from_profiles, profile_dataset, ProfiledTrials, NORMALIZER_EPS};
use crate::seed::{self, tag};
use crate::svm::{accuracy, train_multiclass, SvmParams};

/// Search configuration. `repeats` re-splits stabilize the per-subset
/// accuracy estimate; `repeats = 1` reproduces a single 80/20 evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Largest subset size to enumerate (1 ≤ max_k ≤ channel count).
    pub max_k: usize,
    #[serde(default)]
    pub split: SplitSpec,
    #[serde(default)]
    pub svm: SvmParams,
    #[serde(default)]
    pub fspec: FilterSpec,
    #[serde(default)]
    pub rms: RmsParams,
    #[serde(default = "default_repeats")]
    pub repeats: u32,
    /// Optional explicit subset whitelist; replaces enumeration when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subsets: Option<Vec<Vec<usize>>>,
}

fn default_repeats() -> u32 {
    5
}

impl SearchConfig {
    pub fn new(max_k: usize) -> Self {
        SearchConfig {
            max_k,
            split: SplitSpec::default(),
            svm: SvmParams::default(),
            fspec: FilterSpec::default(),
            rms: RmsParams::default(),
            repeats: 5,
            subsets: None,
        }
    }

    fn validate(&self) -> Result<()> {
        self.split.validate()?;
        self.svm.validate()?;
        self.fspec.validate()?;
        self.rms.validate(self.fspec.sample_rate_hz)?;
        if self.repeats == 0 {
            return Err(Error::InvalidConfig("repeats must be >= 1".to_string()));
        }
        Ok(())
    }
}

/// Training diagnostics aggregated over the winning normalizer's repeats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TrainDiag {
    /// Trials dropped because the normalizer peak fell below the usable
    /// threshold.
    pub dropped_rows: usize,
    /// Pairwise trainings that hit the sweep cap, summed over repeats.
    pub nonconverged_pairs: u32,
}

/// Outcome of one subset evaluation: the best normalizer and its mean
/// accuracy over the re-splits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetResult {
    pub subset: Vec<usize>,
    /// Winning normalizer channel (for size-1 subsets, the channel itself).
    pub normalizer: usize,
    /// Mean test accuracy over repeats.
    pub accuracy: f64,
    /// Population standard deviation of the per-repeat accuracies.
    pub accuracy_sd: f64,
    pub repeats: u32,
    pub train_diag: TrainDiag,
}

impl SubsetResult {
    pub fn k(&self) -> usize {
        self.subset.len()
    }
}

/// Best result per subset size, ascending k.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frontier {
    pub entries: Vec<SubsetResult>,
}

impl Frontier {
    pub fn best(&self) -> Option<&SubsetResult> {
        self.entries
            .iter()
            .max_by(|a, b| a.accuracy.total_cmp(&b.accuracy))
    }

    /// Smallest k whose frontier accuracy is within `tolerance` of the
    /// global maximum — "more channels stop helping here".
    pub fn plateau_k(&self, tolerance: f64) -> Option<usize> {
        let best = self.best()?.accuracy;
        self.entries
            .iter()
            .find(|e| e.accuracy >= best - tolerance)
            .map(SubsetResult::k)
    }
}

/// Full search output: one result per evaluated subset (k ascending,
/// lexicographic within k) plus the frontier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchReport {
    pub results: Vec<SubsetResult>,
    pub frontier: Frontier,
}

/// All strictly increasing index lists of length `k` over `0..n`, in
/// lexicographic order.
pub fn enumerate_subsets(n: usize, k: usize) -> Result<Vec<Vec<usize>>> {
    if k == 0 || k > n {
        return Err(Error::InvalidConfig(format!(
            "subset size {k} out of range for {n} channels"
        )));
    }
    let mut out = Vec::new();
    let mut current: Vec<usize> = (0..k).collect();
    loop {
        out.push(current.clone());
        // Advance to the next combination.
        let mut i = k;
        loop {
            if i == 0 {
                return Ok(out);
            }
            i -= 1;
            if current[i] != i + n - k {
                break;
            }
            if i == 0 {
                return Ok(out);
            }
        }
        current[i] += 1;
        for j in i + 1..k {
            current[j] = current[j - 1] + 1;
        }
    }
}

fn split_rows(
    class_of: &[usize],
    n_classes: usize,
    split: &SplitSpec,
    derived_seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if split.stratified {
        stratified_split_indices(class_of, n_classes, split.train_fraction, derived_seed)
    } else {
        if class_of.len() < 2 {
            return Err(Error::ClassTooSmall {
                label: "<all>".into(),
                count: class_of.len(),
                required: 2,
            });
        }
        use rand::seq::SliceRandom;
        let mut rows: Vec<usize> = (0..class_of.len()).collect();
        let mut rng = seed::rng(derived_seed, &[tag::SPLIT]);
        rows.shuffle(&mut rng);
        let n_train = (split.train_fraction * rows.len() as f64).floor() as usize;
        let (mut train, mut test) = (rows[..n_train].to_vec(), rows[n_train..].to_vec());
        train.sort_unstable();
        test.sort_unstable();
        Ok((train, test))
    }
}

fn gather(x: &[Vec<f64>], y: &[usize], idx: &[usize]) -> (Vec<Vec<f64>>, Vec<usize>) {
    (
        idx.iter().map(|&i| x[i].clone()).collect(),
        idx.iter().map(|&i| y[i]).collect(),
    )
}

/// Scores one (subset, normalizer) candidate: mean/sd of test accuracy over
/// the configured re-splits.
fn score_candidate(
    profiled: &ProfiledTrials,
    classes: &[ActionLabel],
    subset: &[usize],
    normalizer: Option<usize>,
    cfg: &SearchConfig,
) -> Result<(f64, f64, TrainDiag)> {
    let design = design_from_profiles(profiled, subset, normalizer, NORMALIZER_EPS)?;
    let norm_for_seed = normalizer.unwrap_or(subset[0]);
    let mut accuracies = Vec::with_capacity(cfg.repeats as usize);
    let mut diag = TrainDiag {
        dropped_rows: design.dropped,
        nonconverged_pairs: 0,
    };
    for repeat in 0..cfg.repeats {
        let split_seed = seed::mix_subset(
            cfg.split.seed,
            tag::SPLIT,
            subset,
            norm_for_seed,
            u64::from(repeat),
        );
        let (train_idx, test_idx) = split_rows(&design.y, classes.len(), &cfg.split, split_seed)?;
        let (x_train, y_train) = gather(&design.x, &design.y, &train_idx);
        let (x_test, y_test) = gather(&design.x, &design.y, &test_idx);
        let svm_params = SvmParams {
            seed: seed::mix_subset(
                cfg.svm.seed,
                tag::SVM_RUN,
                subset,
                norm_for_seed,
                u64::from(repeat),
            ),
            ..cfg.svm.clone()
        };
        let model = train_multiclass(&x_train, &y_train, classes, &svm_params)?;
        diag.nonconverged_pairs += model.models.iter().filter(|m| !m.converged).count() as u32;
        accuracies.push(accuracy(&model, &x_test, &y_test)?);
    }
    let n = accuracies.len() as f64;
    let mean = accuracies.iter().sum::<f64>() / n;
    let var = accuracies.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
    Ok((mean, var.sqrt(), diag))
}

/// Evaluates one subset against cached peak profiles: sweeps every member
/// channel as the normalizer and returns the best mean accuracy (ties break
/// toward the lowest channel index). Individual normalizer failures are
/// tolerated as long as at least one succeeds.
pub fn evaluate_subset_profiled(
    profiled: &ProfiledTrials,
    classes: &[ActionLabel],
    subset: &[usize],
    cfg: &SearchConfig,
) -> Result<SubsetResult> {
    cfg.validate()?;
    validate_subset(subset, profiled.n_channels)?;
    let candidates: Vec<Option<usize>> = if subset.len() == 1 {
        vec![None]
    } else {
        subset.iter().map(|&c| Some(c)).collect()
    };
    let mut best: Option<SubsetResult> = None;
    let mut last_err: Option<Error> = None;
    for cand in candidates {
        match score_candidate(profiled, classes, subset, cand, cfg) {
            Ok((mean, sd, diag)) => {
                let result = SubsetResult {
                    subset: subset.to_vec(),
                    normalizer: cand.unwrap_or(subset[0]),
                    accuracy: mean,
                    accuracy_sd: sd,
                    repeats: cfg.repeats,
                    train_diag: diag,
                };
                // Strict improvement keeps the lowest-index normalizer on ties.
                if best.as_ref().is_none_or(|b| result.accuracy > b.accuracy) {
                    best = Some(result);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| match last_err {
        Some(e) => e,
        None => Error::NoUsableNormalizer {
            subset: subset.to_vec(),
        },
    })
}

/// Full-pipeline single-subset evaluation (profiles extracted on the fly).
pub fn evaluate_subset(ds: &Dataset, subset: &[usize], cfg: &SearchConfig) -> Result<SubsetResult> {
    let profiled = profile_dataset(ds, &cfg.fspec, &cfg.rms)?;
    evaluate_subset_profiled(&profiled, ds.classes(), subset, cfg)
}

/// Exhaustive search over cached profiles. Subsets come from the whitelist
/// when provided, otherwise every subset of size 1..=max_k in canonical
/// order (k ascending, lexicographic within k). Evaluations run in
/// parallel; output order and content are schedule-independent.
pub fn search_profiled(
    profiled: &ProfiledTrials,
    classes: &[ActionLabel],
    cfg: &SearchConfig,
) -> Result<SearchReport> {
    cfg.validate()?;
    let n = profiled.n_channels;
    let subsets: Vec<Vec<usize>> = match &cfg.subsets {
        Some(list) => {
            if list.is_empty() {
                return Err(Error::InvalidConfig("subset whitelist is empty".to_string()));
            }
            for s in list {
                validate_subset(s, n)?;
            }
            list.clone()
        }
        None => {
            if cfg.max_k == 0 || cfg.max_k > n {
                return Err(Error::InvalidConfig(format!(
                    "max_k {} out of range for {n} channels",
                    cfg.max_k
                )));
            }
            let mut all = Vec::new();
            for k in 1..=cfg.max_k {
                all.extend(enumerate_subsets(n, k)?);
            }
            all
        }
    };

    let results: Vec<SubsetResult> = subsets
        .par_iter()
        .map(|s| evaluate_subset_profiled(profiled, classes, s, cfg))
        .collect::<Result<_>>()?;

    // Best per k; earlier (lexicographically smaller) subsets win ties.
    let mut best_per_k: Vec<Option<&SubsetResult>> = vec![None; n + 1];
    for r in &results {
        let slot = &mut best_per_k[r.k()];
        if slot.is_none_or(|b| r.accuracy > b.accuracy) {
            *slot = Some(r);
        }
    }
    let frontier = Frontier {
        entries: best_per_k.into_iter().flatten().cloned().collect(),
    };
    Ok(SearchReport { results, frontier })
}

/// Exhaustive search straight from a dataset.
pub fn search_all(ds: &Dataset, cfg: &SearchConfig) -> Result<SearchReport> {
    let profiled = profile_dataset(ds, &cfg.fspec, &cfg.rms)?;
    search_profiled(&profiled, ds.classes(), cfg)
}

/// Trains on all of `train_ds` and evaluates on all of `test_ds` (no
/// splitting) — the cross-condition protocol. Every normalizer in the
/// subset is tried; the best test accuracy is returned.
pub fn cross_condition_eval(
    train_ds: &Dataset,
    test_ds: &Dataset,
    subset: &[usize],
    cfg: &SearchConfig,
) -> Result<f64> {
    if train_ds.n_channels() != test_ds.n_channels() {
        return Err(Error::ChannelLayoutMismatch {
            left: train_ds.n_channels(),
            right: test_ds.n_channels(),
        });
    }
    if train_ds.classes() != test_ds.classes() {
        return Err(Error::ClassListMismatch);
    }
    let train_p = profile_dataset(train_ds, &cfg.fspec, &cfg.rms)?;
    let test_p = profile_dataset(test_ds, &cfg.fspec, &cfg.rms)?;
    cross_condition_eval_profiled(&train_p, &test_p, train_ds.classes(), subset, cfg)
}

/// Cross-condition evaluation over cached profiles.
pub fn cross_condition_eval_profiled(
    train_p: &ProfiledTrials,
    test_p: &ProfiledTrials,
    classes: &[ActionLabel],
    subset: &[usize],
    cfg: &SearchConfig,
) -> Result<f64> {
    cfg.validate()?;
    if train_p.n_channels != test_p.n_channels {
        return Err(Error::ChannelLayoutMismatch {
            left: train_p.n_channels,
            right: test_p.n_channels,
        });
    }
    validate_subset(subset, train_p.n_channels)?;
    let candidates: Vec<Option<usize>> = if subset.len() == 1 {
        vec![None]
    } else {
        subset.iter().map(|&c| Some(c)).collect()
    };
    let mut best: Option<f64> = None;
    let mut last_err: Option<Error> = None;
    for cand in candidates {
        let attempt = (|| -> Result<f64> {
            let train_design = design_from_profiles(train_p, subset, cand, NORMALIZER_EPS)?;
            let test_design = design_from_profiles(test_p, subset, cand, NORMALIZER_EPS)?;
            let svm_params = SvmParams {
                seed: seed::mix_subset(
                    cfg.svm.seed,
                    tag::SVM_RUN,
                    subset,
                    cand.unwrap_or(subset[0]),
                    0,
                ),
                ..cfg.svm.clone()
            };
            let model = train_multiclass(&train_design.x, &train_design.y, classes, &svm_params)?;
            accuracy(&model, &test_design.x, &test_design.y)
        })();
        match attempt {
            Ok(acc) => {
                if best.is_none_or(|b| acc > b) {
                    best = Some(acc);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| match last_err {
        Some(e) => e,
        None => Error::NoUsableNormalizer {
            subset: subset.to_vec(),
        },
    })
}

/// `[0, 2, 3]` → `"0-2-3"`.
pub fn format_subset(subset: &[usize]) -> String {
    subset
        .iter()
        .map(usize::to_string)
        .collect::<Vec<_>>()
        .join("-")
}

/// Writes the full result table: `subset,normalizer,k,accuracy_mean,accuracy_sd,repeats`.
pub fn write_results_csv<W: IoWrite>(mut w: W, results: &[SubsetResult]) -> Result<()> {
    let io_err = |e: std::io::Error| Error::io("writing results CSV", e);
    writeln!(w, "subset,normalizer,k,accuracy_mean,accuracy_sd,repeats").map_err(io_err)?;
    for r in results {
        writeln!(
            w,
            "{},{},{},{:.6},{:.6},{}",
            format_subset(&r.subset),
            r.normalizer,
            r.k(),
            r.accuracy,
            r.accuracy_sd,
            r.repeats
        )
        .map_err(io_err)?;
    }
    Ok(())
}

/// Writes the frontier table: `k,best_subset,best_normalizer,accuracy`.
pub fn write_frontier_csv<W: IoWrite>(mut w: W, frontier: &Frontier) -> Result<()> {
    let io_err = |e: std::io::Error| Error::io("writing frontier CSV", e);
    writeln!(w, "k,best_subset,best_normalizer,accuracy").map_err(io_err)?;
    for e in &frontier.entries {
        writeln!(
            w,
            "{},{},{},{:.6}",
            e.k(),
            format_subset(&e.subset),
            e.normalizer,
            e.accuracy
        )
        .map_err(io_err)?;
    }
    Ok(())
}
