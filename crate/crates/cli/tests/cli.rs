//! End-to-end tests of the `semg` binary: every subcommand, the exit-code
//! contract, and output determinism across `--jobs` values.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

/// Separable 3-class / 3-channel profile at a light sample rate so a whole
/// dataset generates in well under a second.
const PROFILE_3CH: &str = r#"{
  "classes": [
    {"limb": "upper", "joint": "finger", "action": "flexion", "digit": "thumb"},
    {"limb": "upper", "joint": "finger", "action": "flexion", "digit": "index"},
    {"limb": "upper", "joint": "finger", "action": "flexion", "digit": "middle"}
  ],
  "gains": [[55e-6, 20e-6, 20e-6], [20e-6, 55e-6, 20e-6], [20e-6, 20e-6, 55e-6]],
  "config": {
    "sample_rate_hz": 2000.0, "duration_s": 1.2, "relaxation_s": 0.3,
    "burst_start_s": 0.4, "burst_len_s": 0.4, "envelope": "hann",
    "carrier_band": [70.0, 250.0], "mains_hz": 50.0, "mains_amp": 20e-6,
    "baseline_noise_rms": 5e-6, "gain_jitter_rel": 0.15,
    "channel_jitter_rel": 0.05, "seed": 0
  }
}"#;

/// Two-channel variant used to provoke model/dataset dimension mismatches.
const PROFILE_2CH: &str = r#"{
  "classes": [
    {"limb": "upper", "joint": "finger", "action": "flexion", "digit": "thumb"},
    {"limb": "upper", "joint": "finger", "action": "flexion", "digit": "index"}
  ],
  "gains": [[55e-6, 20e-6], [20e-6, 55e-6]],
  "config": {
    "sample_rate_hz": 2000.0, "duration_s": 1.2, "relaxation_s": 0.3,
    "burst_start_s": 0.4, "burst_len_s": 0.4, "envelope": "hann",
    "carrier_band": [70.0, 250.0], "mains_hz": 50.0, "mains_amp": 20e-6,
    "baseline_noise_rms": 5e-6, "gain_jitter_rel": 0.15,
    "channel_jitter_rel": 0.05, "seed": 0
  }
}"#;

fn semg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_semg"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_ok(args: &[&str]) -> String {
    let out = semg(args);
    assert!(
        out.status.success(),
        "expected success for {args:?}\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("utf-8 stdout")
}

fn assert_exit(args: &[&str], code: i32) -> String {
    let out = semg(args);
    assert_eq!(
        out.status.code(),
        Some(code),
        "expected exit {code} for {args:?}\nstderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stderr).expect("utf-8 stderr")
}

/// Writes a profile file and synthesizes a dataset from it.
fn make_dataset(dir: &Path, profile: &str, name: &str, seed: &str, trials: &str) -> PathBuf {
    let profile_path = dir.join(format!("{name}_profile.json"));
    fs::write(&profile_path, profile).unwrap();
    let ds = dir.join(name);
    run_ok(&[
        "--seed",
        seed,
        "--out",
        ds.to_str().unwrap(),
        "synth",
        "--profile",
        profile_path.to_str().unwrap(),
        "--trials",
        trials,
    ]);
    ds
}

#[test]
fn synth_preset_writes_dataset_and_summary() {
    let tmp = TempDir::new().unwrap();
    let ds = tmp.path().join("knee");
    let stdout = run_ok(&[
        "--seed",
        "7",
        "--out",
        ds.to_str().unwrap(),
        "synth",
        "--preset",
        "knee2",
        "--trials",
        "2",
    ]);
    assert!(
        stdout.contains("4 trials (2 classes x 2), 3 channels, seed 7"),
        "summary line missing: {stdout}"
    );
    assert!(ds.join("manifest.json").exists());
    assert!(ds.join("synth_config.json").exists());
    // One CSV per trial.
    let csvs = fs::read_dir(&ds)
        .unwrap()
        .filter(|e| {
            e.as_ref()
                .unwrap()
                .path()
                .extension()
                .is_some_and(|x| x == "csv")
        })
        .count();
    assert_eq!(csvs, 4);
}

#[test]
fn synth_unknown_preset_exits_2_and_lists_presets() {
    let tmp = TempDir::new().unwrap();
    let stderr = assert_exit(
        &[
            "--out",
            tmp.path().to_str().unwrap(),
            "synth",
            "--preset",
            "nosuch",
        ],
        2,
    );
    for name in ["fingers4", "knee2", "ankle3"] {
        assert!(stderr.contains(name), "preset list missing {name}: {stderr}");
    }
}

#[test]
fn preprocess_dumps_one_rms_csv_per_trial() {
    let tmp = TempDir::new().unwrap();
    let ds = make_dataset(tmp.path(), PROFILE_3CH, "ds", "9", "4");
    let out = tmp.path().join("rms");
    run_ok(&[
        "--out",
        out.to_str().unwrap(),
        "preprocess",
        "--dataset",
        ds.to_str().unwrap(),
    ]);
    let files: Vec<_> = fs::read_dir(&out).unwrap().collect();
    assert_eq!(files.len(), 12, "one RMS dump per trial");
    let any = out.join("c00r000_rms.csv");
    let text = fs::read_to_string(any).unwrap();
    assert!(text.starts_with("t,ch0,ch1,ch2\n"));
    // 1.2 s at 2 kHz with 20 ms window / 5 ms hop -> (2400-40)/10 + 1 windows.
    assert_eq!(text.lines().count() - 1, 237);
}

#[test]
fn features_exports_rows_for_every_trial_and_normalizer() {
    let tmp = TempDir::new().unwrap();
    let ds = make_dataset(tmp.path(), PROFILE_3CH, "ds", "9", "4");
    let out = tmp.path().join("feat");
    run_ok(&[
        "--out",
        out.to_str().unwrap(),
        "features",
        "--dataset",
        ds.to_str().unwrap(),
    ]);
    let text = fs::read_to_string(out.join("features.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("trial_id,normalizer,f0,f1,label"));
    // 12 trials x 3 candidate normalizers.
    assert_eq!(lines.count(), 36);
    assert!(text.contains("upper.finger.flexion.middle"));
}

#[test]
fn train_then_eval_reports_separable_accuracy() {
    let tmp = TempDir::new().unwrap();
    let ds = make_dataset(tmp.path(), PROFILE_3CH, "ds", "9", "4");
    let model_dir = tmp.path().join("model");
    let stdout = run_ok(&[
        "--seed",
        "9",
        "--out",
        model_dir.to_str().unwrap(),
        "train",
        "--dataset",
        ds.to_str().unwrap(),
        "--normalizer",
        "0",
    ]);
    assert!(stdout.contains("trained 3 classes on 12 rows (2 features each)"));
    let model = model_dir.join("model.json");
    assert!(model.exists());
    assert!(model_dir.join("train_config.json").exists());

    let stdout = run_ok(&[
        "eval",
        "--dataset",
        ds.to_str().unwrap(),
        "--model",
        model.to_str().unwrap(),
        "--normalizer",
        "0",
    ]);
    let acc: f64 = stdout
        .lines()
        .next()
        .and_then(|l| l.strip_prefix("accuracy "))
        .and_then(|l| l.split_whitespace().next())
        .expect("accuracy line first")
        .parse()
        .expect("accuracy value");
    assert!(acc >= 0.95, "separable set should score >= 0.95, got {acc}");
    assert!(stdout.contains("confusion (rows = true class, columns = predicted):"));
    // One confusion row per class, each naming its label.
    for label in ["thumb", "index", "middle"] {
        assert!(
            stdout.contains(&format!("upper.finger.flexion.{label}")),
            "missing confusion row for {label}: {stdout}"
        );
    }
}

#[test]
fn eval_with_mismatched_channel_count_exits_3() {
    let tmp = TempDir::new().unwrap();
    let ds3 = make_dataset(tmp.path(), PROFILE_3CH, "ds3", "9", "4");
    let ds2 = make_dataset(tmp.path(), PROFILE_2CH, "ds2", "3", "4");
    let model_dir = tmp.path().join("model");
    run_ok(&[
        "--seed",
        "9",
        "--out",
        model_dir.to_str().unwrap(),
        "train",
        "--dataset",
        ds3.to_str().unwrap(),
        "--normalizer",
        "0",
    ]);
    let stderr = assert_exit(
        &[
            "eval",
            "--dataset",
            ds2.to_str().unwrap(),
            "--model",
            model_dir.join("model.json").to_str().unwrap(),
            "--normalizer",
            "0",
        ],
        3,
    );
    assert!(
        stderr.contains("feature dimensions"),
        "should name the dimension mismatch: {stderr}"
    );
}

#[test]
fn train_strict_nonconvergence_exits_4() {
    let tmp = TempDir::new().unwrap();
    let ds = make_dataset(tmp.path(), PROFILE_3CH, "ds", "9", "4");
    let stderr = assert_exit(
        &[
            "--out",
            tmp.path().join("m").to_str().unwrap(),
            "train",
            "--dataset",
            ds.to_str().unwrap(),
            "--normalizer",
            "0",
            "--max-iter",
            "1",
            "--strict",
        ],
        4,
    );
    assert!(stderr.contains("did not converge"), "stderr: {stderr}");
}

#[test]
fn search_writes_reports_and_summary() {
    let tmp = TempDir::new().unwrap();
    let ds = make_dataset(tmp.path(), PROFILE_3CH, "ds", "9", "4");
    let out = tmp.path().join("rep");
    let stdout = run_ok(&[
        "--seed",
        "9",
        "--out",
        out.to_str().unwrap(),
        "search",
        "--dataset",
        ds.to_str().unwrap(),
        "--repeats",
        "2",
    ]);
    let results = fs::read_to_string(out.join("results.csv")).unwrap();
    assert!(results.starts_with("subset,normalizer,k,accuracy_mean,accuracy_sd,repeats\n"));
    assert_eq!(results.lines().count() - 1, 7, "2^3 - 1 subsets");
    assert!(out.join("frontier.csv").exists());
    for needle in ["k=1 best subset", "k=3 best subset", "frontier plateaus at k = "] {
        assert!(stdout.contains(needle), "summary missing '{needle}': {stdout}");
    }
}

#[test]
fn search_outputs_do_not_depend_on_jobs() {
    let tmp = TempDir::new().unwrap();
    let ds = make_dataset(tmp.path(), PROFILE_3CH, "ds", "9", "4");
    let (out1, out3) = (tmp.path().join("j1"), tmp.path().join("j3"));
    for (jobs, out) in [("1", &out1), ("3", &out3)] {
        run_ok(&[
            "--seed",
            "9",
            "--jobs",
            jobs,
            "--out",
            out.to_str().unwrap(),
            "search",
            "--dataset",
            ds.to_str().unwrap(),
            "--repeats",
            "2",
        ]);
    }
    for file in ["results.csv", "frontier.csv"] {
        let a = fs::read(out1.join(file)).unwrap();
        let b = fs::read(out3.join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between --jobs 1 and --jobs 3");
    }
}

#[test]
fn search_rejects_max_k_zero_as_usage_error() {
    let tmp = TempDir::new().unwrap();
    let ds = make_dataset(tmp.path(), PROFILE_3CH, "ds", "9", "4");
    assert_exit(
        &[
            "--out",
            tmp.path().join("rep").to_str().unwrap(),
            "search",
            "--dataset",
            ds.to_str().unwrap(),
            "--max-k",
            "0",
        ],
        2,
    );
}

#[test]
fn search_accepts_experiment_config_file() {
    let tmp = TempDir::new().unwrap();
    let ds = make_dataset(tmp.path(), PROFILE_3CH, "ds", "9", "4");
    let out = tmp.path().join("rep");
    let config = tmp.path().join("exp.json");
    fs::write(
        &config,
        format!(
            r#"{{
  "dataset": "{}",
  "classes": [
    {{"limb": "upper", "joint": "finger", "action": "flexion", "digit": "thumb"}},
    {{"limb": "upper", "joint": "finger", "action": "flexion", "digit": "index"}}
  ],
  "search": {{
    "max_k": 2,
    "repeats": 2,
    "fspec": {{"sample_rate_hz": 2000.0, "band_hi_hz": 300.0}}
  }}
}}"#,
            ds.display()
        ),
    )
    .unwrap();
    let stdout = run_ok(&[
        "--out",
        out.to_str().unwrap(),
        "search",
        "--config",
        config.to_str().unwrap(),
    ]);
    // Class filter keeps 2 of 3 classes; max_k 2 over 3 channels -> 6 subsets.
    assert!(stdout.contains("searched 6 subsets (2 classes, 2 repeats)"));
    assert_eq!(
        fs::read_to_string(out.join("results.csv"))
            .unwrap()
            .lines()
            .count()
            - 1,
        6
    );
}

#[test]
fn cross_eval_prints_matrix_and_writes_tidy_csv() {
    let tmp = TempDir::new().unwrap();
    let ds_a = make_dataset(tmp.path(), PROFILE_3CH, "cond_a", "9", "4");
    let ds_b = make_dataset(tmp.path(), PROFILE_3CH, "cond_b", "11", "4");
    let out = tmp.path().join("xm");
    let stdout = run_ok(&[
        "--seed",
        "9",
        "--out",
        out.to_str().unwrap(),
        "cross-eval",
        "--datasets",
        ds_a.to_str().unwrap(),
        ds_b.to_str().unwrap(),
    ]);
    assert!(stdout.contains("cross-condition accuracy"));
    assert!(stdout.contains("cond_a") && stdout.contains("cond_b"));
    let csv = fs::read_to_string(out.join("cross_matrix.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("train,test,accuracy"));
    assert_eq!(lines.count(), 4, "2x2 matrix rows");
}
