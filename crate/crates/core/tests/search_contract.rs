//! Exhaustive subset × normalizer search contracts, on peak profiles with
//! known class geometry.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use semg_core::data::{Action, ActionLabel, ChannelId, Digit, Joint, Limb};
use semg_core::features::{PeakProfile, ProfiledTrials};
use semg_core::search::{
    cross_condition_eval, cross_condition_eval_profiled, evaluate_subset_profiled,
    search_profiled, write_frontier_csv, write_results_csv, SearchConfig,
};
use semg_core::synth::{generate_dataset, ClassGainProfile, SynthConfig};
use semg_core::Error;

fn finger(d: Digit) -> ActionLabel {
    ActionLabel::new(Limb::Upper, Joint::Finger, Action::Flexion).with_digit(d)
}

fn four_classes() -> Vec<ActionLabel> {
    vec![
        finger(Digit::Thumb),
        finger(Digit::Index),
        finger(Digit::Middle),
        finger(Digit::Ring),
    ]
}

/// Builds peak profiles straight from a gain matrix plus multiplicative
/// jitter — the same geometry the signal chain produces, without the
/// signal chain.
fn synthetic_profiles(
    gains: &[Vec<f64>],
    per_class: usize,
    jitter: f64,
    seed: u64,
) -> ProfiledTrials {
    let n_channels = gains[0].len();
    let mut profiles = Vec::new();
    let mut labels = Vec::new();
    let mut class_of = Vec::new();
    let classes = four_classes();
    for (c, row) in gains.iter().enumerate() {
        for r in 0..per_class {
            let mut rng = ChaCha12Rng::seed_from_u64(
                seed ^ (c as u64).wrapping_mul(0x9E3779B97F4A7C15) ^ (r as u64) << 32,
            );
            let shared = 1.0 + rng.random_range(-3.0 * jitter..=3.0 * jitter);
            let peaks: Vec<f64> = row
                .iter()
                .map(|g| g * shared * (1.0 + rng.random_range(-jitter..=jitter)))
                .collect();
            profiles.push(PeakProfile {
                peaks,
                baselines: vec![0.0; n_channels],
                trial_id: format!("c{c:02}r{r:03}"),
            });
            labels.push(classes[c % classes.len()].clone());
            class_of.push(c);
        }
    }
    ProfiledTrials {
        profiles,
        labels,
        class_of,
        n_channels,
        n_classes: gains.len(),
    }
}

/// Channels 2 and 3 carry the class signal (distinct ratios per class);
/// everything else is constant across classes.
fn informative_pair_gains() -> Vec<Vec<f64>> {
    vec![
        vec![25.0, 25.0, 55.0, 22.0, 25.0, 25.0],
        vec![25.0, 25.0, 22.0, 55.0, 25.0, 25.0],
        vec![25.0, 25.0, 40.0, 28.0, 25.0, 25.0],
        vec![25.0, 25.0, 28.0, 40.0, 25.0, 25.0],
    ]
}

fn quick_config(max_k: usize) -> SearchConfig {
    let mut cfg = SearchConfig::new(max_k);
    cfg.repeats = 3;
    cfg
}

#[test]
fn informative_pair_scores_high_uninformative_scores_low() {
    let profiled = synthetic_profiles(&informative_pair_gains(), 12, 0.05, 17);
    let classes = four_classes();
    let cfg = quick_config(2);

    let good = evaluate_subset_profiled(&profiled, &classes, &[2, 3], &cfg).unwrap();
    assert!(
        good.accuracy >= 0.95,
        "informative pair scored {}",
        good.accuracy
    );
    assert!(good.subset == vec![2, 3]);
    assert!([2, 3].contains(&good.normalizer));

    let bad = evaluate_subset_profiled(&profiled, &classes, &[0, 1], &cfg).unwrap();
    assert!(
        bad.accuracy <= 0.45,
        "uninformative pair scored {}",
        bad.accuracy
    );
}

#[test]
fn full_search_enumerates_63_subsets_with_consistent_frontier() {
    let profiled = synthetic_profiles(&informative_pair_gains(), 10, 0.05, 23);
    let classes = four_classes();
    let cfg = quick_config(6);
    let report = search_profiled(&profiled, &classes, &cfg).unwrap();

    assert_eq!(report.results.len(), 63);
    // Canonical order: k ascending, lexicographic within k.
    assert_eq!(report.results[0].subset, vec![0]);
    assert_eq!(report.results[5].subset, vec![5]);
    assert_eq!(report.results[6].subset, vec![0, 1]);
    assert_eq!(report.results[62].subset, vec![0, 1, 2, 3, 4, 5]);

    // Frontier entries are the best of their size; ties go to the
    // lexicographically smallest subset.
    assert_eq!(report.frontier.entries.len(), 6);
    for entry in &report.frontier.entries {
        let same_k: Vec<_> = report.results.iter().filter(|r| r.k() == entry.k()).collect();
        let max = same_k
            .iter()
            .map(|r| r.accuracy)
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(entry.accuracy, max, "frontier k={} not maximal", entry.k());
        let first_argmax = same_k.iter().find(|r| r.accuracy == max).unwrap();
        assert_eq!(
            entry.subset, first_argmax.subset,
            "frontier k={} tie not broken canonically",
            entry.k()
        );
    }

    // The informative pair dominates: every frontier entry of size >= 2
    // contains channels 2 and 3 once they fit.
    let best = report.frontier.best().unwrap();
    assert!(best.subset.contains(&2) && best.subset.contains(&3));
    assert!(best.accuracy >= 0.95);
}

#[test]
fn subset_whitelist_replaces_enumeration() {
    let profiled = synthetic_profiles(&informative_pair_gains(), 8, 0.05, 29);
    let classes = four_classes();
    let mut cfg = quick_config(6);
    cfg.subsets = Some(vec![vec![0, 2, 3], vec![1]]);
    let report = search_profiled(&profiled, &classes, &cfg).unwrap();
    assert_eq!(report.results.len(), 2);
    assert_eq!(report.results[0].subset, vec![0, 2, 3]);
    assert_eq!(report.results[1].subset, vec![1]);
}

#[test]
fn repeated_search_writes_identical_csv_bytes() {
    let profiled = synthetic_profiles(&informative_pair_gains(), 8, 0.05, 31);
    let classes = four_classes();
    let cfg = quick_config(3);

    let mut blobs = Vec::new();
    for _ in 0..2 {
        let report = search_profiled(&profiled, &classes, &cfg).unwrap();
        let mut results = Vec::new();
        write_results_csv(&mut results, &report.results).unwrap();
        let mut frontier = Vec::new();
        write_frontier_csv(&mut frontier, &report.frontier).unwrap();
        blobs.push((results, frontier));
    }
    assert_eq!(blobs[0].0, blobs[1].0, "results.csv differs between runs");
    assert_eq!(blobs[0].1, blobs[1].1, "frontier.csv differs between runs");
}

#[test]
fn cross_condition_identity_and_degradation_ordering() {
    let base = informative_pair_gains();
    // "Rotated" condition: informative channels swap roles; a classifier
    // trained on `base` should transfer poorly.
    let swapped: Vec<Vec<f64>> = base
        .iter()
        .map(|row| {
            let mut r = row.clone();
            r.swap(2, 3);
            r
        })
        .collect();
    // Mild condition shift: halfway blend.
    let blended: Vec<Vec<f64>> = base
        .iter()
        .zip(&swapped)
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| 0.7 * x + 0.3 * y).collect())
        .collect();

    let p_base = synthetic_profiles(&base, 12, 0.05, 37);
    let p_blend = synthetic_profiles(&blended, 12, 0.05, 38);
    let p_swap = synthetic_profiles(&swapped, 12, 0.05, 39);

    let classes = four_classes();
    let cfg = quick_config(2);
    let subset = vec![2usize, 3];

    let same =
        cross_condition_eval_profiled(&p_base, &p_base, &classes, &subset, &cfg).unwrap();
    let mid =
        cross_condition_eval_profiled(&p_base, &p_blend, &classes, &subset, &cfg).unwrap();
    let far =
        cross_condition_eval_profiled(&p_base, &p_swap, &classes, &subset, &cfg).unwrap();

    assert!(same >= 0.95, "identity accuracy {same}");
    assert!(
        same >= mid && mid >= far,
        "expected monotone degradation, got same={same} mid={mid} far={far}"
    );
    assert!(far <= 0.6, "swapped-channel transfer unexpectedly high: {far}");
}

#[test]
fn cross_condition_rejects_mismatched_datasets() {
    let cfg = SynthConfig {
        sample_rate_hz: 1_000.0,
        duration_s: 1.0,
        relaxation_s: 0.25,
        burst_start_s: 0.3,
        burst_len_s: 0.4,
        seed: 3,
        ..SynthConfig::default()
    };
    let channels = vec![ChannelId::new(0, "a"), ChannelId::new(1, "b")];
    let gains = ClassGainProfile {
        gains: vec![vec![50e-6, 20e-6], vec![20e-6, 50e-6]],
    };
    let thumb_index = vec![finger(Digit::Thumb), finger(Digit::Index)];
    let thumb_middle = vec![finger(Digit::Thumb), finger(Digit::Middle)];
    let ds_a = generate_dataset(&cfg, &gains, &thumb_index, &channels, 3).unwrap();
    let ds_b = generate_dataset(&cfg, &gains, &thumb_middle, &channels, 3).unwrap();

    let mut scfg = SearchConfig::new(2);
    scfg.fspec = semg_core::FilterSpec::for_sample_rate(1_000.0);
    match cross_condition_eval(&ds_a, &ds_b, &[0, 1], &scfg) {
        Err(Error::ClassListMismatch) => {}
        other => panic!("expected ClassListMismatch, got {other:?}"),
    }

    let channels3 = vec![
        ChannelId::new(0, "a"),
        ChannelId::new(1, "b"),
        ChannelId::new(2, "c"),
    ];
    let gains3 = ClassGainProfile {
        gains: vec![vec![50e-6, 20e-6, 30e-6], vec![20e-6, 50e-6, 30e-6]],
    };
    let ds_c = generate_dataset(&cfg, &gains3, &thumb_index, &channels3, 3).unwrap();
    match cross_condition_eval(&ds_a, &ds_c, &[0, 1], &scfg) {
        Err(Error::ChannelLayoutMismatch { left, right }) => {
            assert_eq!((left, right), (2, 3));
        }
        other => panic!("expected ChannelLayoutMismatch, got {other:?}"),
    }
}
