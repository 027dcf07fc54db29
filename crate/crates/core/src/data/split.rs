//! Deterministic train/test splitting.
//!
//! The stratified mode mirrors the experimental protocol: within each class,
//! `floor(train_fraction * count)` trials go to training and the remainder
//! to test, after a seeded shuffle. The floor rule guarantees a nonempty
//! test side for every class whenever the fraction is below 1.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    /// Fraction of each class assigned to training; must lie in (0, 1).
    pub train_fraction: f64,
    pub seed: u64,
    /// When false, split the trial list globally instead of per class.
    pub stratified: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.8,
            seed: 0,
            stratified: true,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction.is_finite()
            && self.train_fraction > 0.0
            && self.train_fraction < 1.0)
        {
            return Err(Error::InvalidConfig(format!(
                "train_fraction must lie strictly between 0 and 1, got {}",
                self.train_fraction
            )));
        }
        Ok(())
    }
}

/// Splits row indices `0..class_of.len()` by class. Rows of class `c` are
/// those with `class_of[i] == c`; every class present must have at least
/// `2` rows. Returns (train, test) index lists, each sorted ascending so the
/// caller's row order is preserved.
///
/// This is the single splitting kernel: [`split_dataset`] applies it to
/// trials, the subset search applies it to design-matrix rows.
pub fn stratified_split_indices(
    class_of: &[usize],
    n_classes: usize,
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_fraction.is_finite() && train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "train_fraction must lie strictly between 0 and 1, got {train_fraction}"
        )));
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in 0..n_classes {
        let mut rows: Vec<usize> = (0..class_of.len())
            .filter(|&i| class_of[i] == class)
            .collect();
        if rows.is_empty() {
            continue;
        }
        if rows.len() < 2 {
            return Err(Error::ClassTooSmall {
                label: format!("#{class}"),
                count: rows.len(),
                required: 2,
            });
        }
        // Independent seed per class so the shuffle does not depend on how
        // many classes precede this one.
        let mut rng = seed::rng(seed, &[seed::tag::CLASS_SHUFFLE, class as u64]);
        rows.shuffle(&mut rng);
        let n_train = (train_fraction * rows.len() as f64).floor() as usize;
        train.extend_from_slice(&rows[..n_train]);
        test.extend_from_slice(&rows[n_train..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Partitions a dataset into train and test datasets. Both sides keep the
/// parent's class list so class indices stay aligned across the split.
pub fn split_dataset(ds: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
    spec.validate()?;
    let (train_idx, test_idx) = if spec.stratified {
        let class_of = ds.class_indices();
        // Report undersized classes by label, not by index.
        for (ci, class) in ds.classes().iter().enumerate() {
            let count = class_of.iter().filter(|&&c| c == ci).count();
            if count < 2 {
                return Err(Error::ClassTooSmall {
                    label: class.to_string(),
                    count,
                    required: 2,
                });
            }
        }
        stratified_split_indices(
            &class_of,
            ds.classes().len(),
            spec.train_fraction,
            spec.seed,
        )?
    } else {
        if ds.trials().len() < 2 {
            return Err(Error::ClassTooSmall {
                label: "<all>".into(),
                count: ds.trials().len(),
                required: 2,
            });
        }
        let mut rows: Vec<usize> = (0..ds.trials().len()).collect();
        let mut rng = seed::rng(spec.seed, &[seed::tag::SPLIT]);
        rows.shuffle(&mut rng);
        let n_train = (spec.train_fraction * rows.len() as f64).floor() as usize;
        let mut train: Vec<usize> = rows[..n_train].to_vec();
        let mut test: Vec<usize> = rows[n_train..].to_vec();
        train.sort_unstable();
        test.sort_unstable();
        (train, test)
    };

    let pick = |idx: &[usize]| -> Result<Dataset> {
        let trials = idx.iter().map(|&i| ds.trials()[i].clone()).collect();
        Dataset::with_classes(ds.channels().to_vec(), trials, ds.classes().to_vec())
    };
    Ok((pick(&train_idx)?, pick(&test_idx)?))
}
