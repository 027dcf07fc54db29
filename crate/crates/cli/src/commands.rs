//! Subcommand implementations. Every command is a pure function of its
//! flags and the `--seed` value; files it writes are byte-identical across
//! runs and thread counts.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use semg_core::data::{load_dataset, ActionLabel, ChannelId, Dataset};
use semg_core::dsp::moving_rms;
use semg_core::error::{Error, Result};
use semg_core::features::{
    design_from_profiles, extract_peaks, normalize, profile_dataset, NORMALIZER_EPS,
};
use semg_core::search::{
    cross_condition_eval, format_subset, search_profiled, write_frontier_csv, write_results_csv,
    SearchConfig,
};
use semg_core::svm::{
    accuracy, confusion, load_model, save_model, train_multiclass, KernelSpec, MultiClassModel,
    SvmParams,
};
use semg_core::synth::{preset, write_dataset, ClassGainProfile, SynthConfig};

use crate::args::{
    Cli, Cmd, CrossEvalArgs, EvalArgs, FeaturesArgs, PreprocessArgs, SearchArgs, SynthArgs,
    TrainArgs,
};

pub fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.cmd {
        Cmd::Synth(a) => cmd_synth(cli, a),
        Cmd::Preprocess(a) => cmd_preprocess(cli, a),
        Cmd::Features(a) => cmd_features(cli, a),
        Cmd::Train(a) => cmd_train(cli, a),
        Cmd::Eval(a) => cmd_eval(cli, a),
        Cmd::Search(a) => cmd_search(cli, a),
        Cmd::CrossEval(a) => cmd_cross_eval(cli, a),
    }
}

fn create_out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let json = serde_json::to_string_pretty(value)
        .map_err(|e| Error::json(format!("serializing {}", path.display()), e))?;
    fs::write(path, json + "\n").map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(format!("parsing {}", path.display()), e))
}

/// Sample rate shared by every trial of a dataset.
fn dataset_sample_rate(ds: &Dataset) -> Result<f64> {
    let first = ds
        .trials()
        .first()
        .ok_or_else(|| Error::InvalidConfig("dataset has no trials".into()))?;
    Ok(first.sample_rate_hz)
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

/// Custom gain profile accepted by `synth --profile`: class labels, one
/// gain row (volts) per class, optional channel ids and generator config.
#[derive(Serialize, Deserialize)]
struct ProfileFile {
    classes: Vec<ActionLabel>,
    /// classes.len() rows x channel-count columns, in volts RMS.
    gains: Vec<Vec<f64>>,
    #[serde(default)]
    channels: Option<Vec<ChannelId>>,
    #[serde(default)]
    config: Option<SynthConfig>,
}

/// Generation record written next to the dataset so a run is auditable and
/// reproducible from its outputs alone.
#[derive(Serialize)]
struct SynthRecord<'a> {
    config: &'a SynthConfig,
    classes: &'a [ActionLabel],
    channels: &'a [ChannelId],
    gains: &'a [Vec<f64>],
    trials_per_class: usize,
}

fn cmd_synth(cli: &Cli, a: &SynthArgs) -> Result<()> {
    let (mut config, profile, classes, channels) = if let Some(name) = &a.preset {
        let p = preset(name)?;
        let profile = p.gain_profile_for(a.posture)?;
        (SynthConfig::default(), profile, p.classes.clone(), p.channel_ids())
    } else {
        let file = a.profile.as_ref().expect("clap enforces preset|profile");
        if a.posture.is_some() {
            return Err(Error::InvalidConfig(
                "--posture applies to presets; encode posture variants as separate \
                 profile files"
                    .into(),
            ));
        }
        let spec: ProfileFile = read_json(file)?;
        if spec.classes.len() != spec.gains.len() {
            return Err(Error::InvalidConfig(format!(
                "{} classes but {} gain rows in {}",
                spec.classes.len(),
                spec.gains.len(),
                file.display()
            )));
        }
        // The dataset contract wants classes sorted; permute gain rows along.
        let mut pairs: Vec<(ActionLabel, Vec<f64>)> =
            spec.classes.into_iter().zip(spec.gains).collect();
        pairs.sort_by(|a, b| a.0.cmp(&b.0));
        let (classes, gains): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
        let n_channels = gains.first().map_or(0, Vec::len);
        let channels = spec.channels.unwrap_or_else(|| {
            (0..n_channels)
                .map(|i| ChannelId::new(i, format!("ch{i}")))
                .collect()
        });
        let config = spec.config.unwrap_or_default();
        (config, ClassGainProfile { gains }, classes, channels)
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }

    write_dataset(
        &config,
        &profile,
        &classes,
        &channels,
        a.trials,
        &cli.out,
    )?;
    let record = SynthRecord {
        config: &config,
        classes: &classes,
        channels: &channels,
        gains: &profile.gains,
        trials_per_class: a.trials,
    };
    write_json(&record, &cli.out.join("synth_config.json"))?;

    println!(
        "wrote {} trials ({} classes x {}), {} channels, seed {} -> {}",
        classes.len() * a.trials,
        classes.len(),
        a.trials,
        channels.len(),
        config.seed,
        cli.out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// preprocess
// ---------------------------------------------------------------------------

fn cmd_preprocess(cli: &Cli, a: &PreprocessArgs) -> Result<()> {
    let ds = load_dataset(&a.dataset)?;
    create_out_dir(&cli.out)?;
    let rms_params = a.pipeline.rms();

    let mut windows = 0usize;
    for trial in ds.trials() {
        let fspec = a.pipeline.fspec(trial.sample_rate_hz);
        let series: Vec<_> = trial
            .samples
            .iter()
            .map(|ch| {
                let filtered = fspec.process(ch)?;
                moving_rms(&filtered, trial.sample_rate_hz, &rms_params)
            })
            .collect::<Result<_>>()?;

        let path = cli.out.join(format!("{}_rms.csv", trial.trial_id));
        let file = fs::File::create(&path)
            .map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
        let mut w = BufWriter::new(file);
        let io_err = |e: std::io::Error| Error::io(format!("writing {}", path.display()), e);

        write!(w, "t").map_err(io_err)?;
        for ch in 0..series.len() {
            write!(w, ",ch{ch}").map_err(io_err)?;
        }
        writeln!(w).map_err(io_err)?;
        let n = series.first().map_or(0, |s| s.len());
        for k in 0..n {
            write!(w, "{:.9e}", series[0].time_of(k)).map_err(io_err)?;
            for s in &series {
                write!(w, ",{:.9e}", s.values[k]).map_err(io_err)?;
            }
            writeln!(w).map_err(io_err)?;
        }
        w.flush().map_err(io_err)?;
        windows = n;
    }

    println!(
        "filtered {} trials -> {} ({} RMS windows x {} channels each)",
        ds.trials().len(),
        cli.out.display(),
        windows,
        ds.n_channels()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// features
// ---------------------------------------------------------------------------

fn cmd_features(cli: &Cli, a: &FeaturesArgs) -> Result<()> {
    let ds = load_dataset(&a.dataset)?;
    create_out_dir(&cli.out)?;
    let rms_params = a.pipeline.rms();
    let n_channels = ds.n_channels();

    if let Some(norm) = a.normalizer {
        if norm >= n_channels {
            return Err(Error::InvalidConfig(format!(
                "normalizer channel {norm} out of range for {n_channels} channels"
            )));
        }
    }

    let path = cli.out.join("features.csv");
    let file = fs::File::create(&path)
        .map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e: std::io::Error| Error::io(format!("writing {}", path.display()), e);

    write!(w, "trial_id,normalizer").map_err(io_err)?;
    for i in 0..n_channels.saturating_sub(1) {
        write!(w, ",f{i}").map_err(io_err)?;
    }
    writeln!(w, ",label").map_err(io_err)?;

    let mut rows = 0usize;
    let mut skipped = 0usize;
    for trial in ds.trials() {
        let fspec = a.pipeline.fspec(trial.sample_rate_hz);
        let peaks = extract_peaks(trial, &fspec, &rms_params)?;
        let normalizers: Vec<usize> = match a.normalizer {
            Some(n) => vec![n],
            None => (0..n_channels).collect(),
        };
        for norm in normalizers {
            let fv = match normalize(&peaks, norm, NORMALIZER_EPS, trial.label.clone()) {
                Ok(fv) => fv,
                // In sweep mode a near-zero normalizer peak just excludes
                // that candidate row, mirroring the search pipeline.
                Err(Error::NormalizerTooSmall { .. }) if a.normalizer.is_none() => {
                    skipped += 1;
                    continue;
                }
                Err(e) => return Err(e),
            };
            write!(w, "{},{}", trial.trial_id, norm).map_err(io_err)?;
            for v in &fv.values {
                write!(w, ",{v:.9e}").map_err(io_err)?;
            }
            writeln!(w, ",{}", trial.label).map_err(io_err)?;
            rows += 1;
        }
    }
    w.flush().map_err(io_err)?;

    print!(
        "wrote {rows} feature rows ({} trials) -> {}",
        ds.trials().len(),
        path.display()
    );
    if skipped > 0 {
        print!("; skipped {skipped} rows with normalizer peak below eps");
    }
    println!();
    Ok(())
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

/// Training record written next to the model: everything needed to rebuild
/// the identical feature pipeline at evaluation time.
#[derive(Serialize)]
struct TrainRecord<'a> {
    dataset: &'a Path,
    subset: &'a [usize],
    normalizer: Option<usize>,
    svm: &'a SvmParams,
    no_notch: bool,
    zero_phase: bool,
    window_s: f64,
    hop_s: f64,
}

fn svm_params(cli: &Cli, a: &TrainArgs) -> SvmParams {
    let kernel = if a.linear {
        KernelSpec::linear()
    } else if let Some(g) = a.gamma {
        KernelSpec::rbf(g)
    } else {
        KernelSpec::rbf_scale()
    };
    let defaults = SvmParams::default();
    SvmParams {
        c: a.c,
        kernel,
        standardize: a.standardize,
        max_iter: a.max_iter.unwrap_or(defaults.max_iter),
        seed: cli.seed(),
        ..defaults
    }
}

fn cmd_train(cli: &Cli, a: &TrainArgs) -> Result<()> {
    let ds = load_dataset(&a.dataset)?;
    let fs = dataset_sample_rate(&ds)?;
    let profiled = profile_dataset(&ds, &a.pipeline.fspec(fs), &a.pipeline.rms())?;
    let subset: Vec<usize> = a
        .subset
        .clone()
        .unwrap_or_else(|| (0..profiled.n_channels).collect());
    let design = design_from_profiles(&profiled, &subset, a.normalizer, NORMALIZER_EPS)?;
    let params = svm_params(cli, a);
    let model = train_multiclass(&design.x, &design.y, ds.classes(), &params)?;

    if !model.converged() {
        if a.strict {
            return Err(Error::NotConverged(params.max_iter));
        }
        eprintln!(
            "warning: {} of {} pairwise trainings hit the sweep cap",
            model.models.iter().filter(|m| !m.converged).count(),
            model.models.len()
        );
    }

    create_out_dir(&cli.out)?;
    let model_path = cli.out.join("model.json");
    save_model(&model, &model_path)?;
    let record = TrainRecord {
        dataset: &a.dataset,
        subset: &subset,
        normalizer: a.normalizer,
        svm: &params,
        no_notch: a.pipeline.no_notch,
        zero_phase: a.pipeline.zero_phase,
        window_s: a.pipeline.window_s,
        hop_s: a.pipeline.hop_s,
    };
    write_json(&record, &cli.out.join("train_config.json"))?;

    print!(
        "trained {} classes on {} rows ({} features each); model -> {}",
        model.n_classes(),
        design.x.len(),
        design.n_features,
        model_path.display()
    );
    if design.dropped > 0 {
        print!("; dropped {} rows with normalizer peak below eps", design.dropped);
    }
    println!();
    Ok(())
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

fn cmd_eval(_cli: &Cli, a: &EvalArgs) -> Result<()> {
    let ds = load_dataset(&a.dataset)?;
    let model: MultiClassModel = load_model(&a.model)?;
    let fs = dataset_sample_rate(&ds)?;
    let profiled = profile_dataset(&ds, &a.pipeline.fspec(fs), &a.pipeline.rms())?;
    let subset: Vec<usize> = a
        .subset
        .clone()
        .unwrap_or_else(|| (0..profiled.n_channels).collect());
    let design = design_from_profiles(&profiled, &subset, a.normalizer, NORMALIZER_EPS)?;

    // Design rows index the dataset's class list; remap onto the model's.
    let remap: Vec<usize> = ds
        .classes()
        .iter()
        .map(|c| {
            model
                .classes
                .iter()
                .position(|m| m == c)
                .ok_or_else(|| Error::UnknownClass {
                    label: c.to_string(),
                })
        })
        .collect::<Result<_>>()?;
    let y: Vec<usize> = design.y.iter().map(|&i| remap[i]).collect();

    let acc = accuracy(&model, &design.x, &y)?;
    let conf = confusion(&model, &design.x, &y)?;
    let correct: usize = (0..conf.len()).map(|i| conf[i][i]).sum();

    println!("accuracy {:.4} ({}/{} rows)", acc, correct, design.x.len());
    println!("confusion (rows = true class, columns = predicted):");
    let width = model
        .classes
        .iter()
        .map(|c| c.to_string().len())
        .max()
        .unwrap_or(0);
    print!("  {:width$}  ", "");
    for j in 0..model.n_classes() {
        print!(" c{j:<4}");
    }
    println!();
    for (i, row) in conf.iter().enumerate() {
        print!("  {:width$} c{i} ", model.classes[i].to_string());
        for count in row {
            print!(" {count:<5}");
        }
        println!();
    }
    if design.dropped > 0 {
        println!(
            "note: dropped {} rows with normalizer peak below eps",
            design.dropped
        );
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// search
// ---------------------------------------------------------------------------

/// A full experiment in one JSON file: dataset, class filter, and every
/// pipeline/search knob.
#[derive(Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: PathBuf,
    /// Keep only these classes; empty means all.
    #[serde(default)]
    pub classes: Vec<ActionLabel>,
    pub search: SearchConfig,
    /// Output directory; falls back to the global `--out`.
    #[serde(default)]
    pub out: Option<PathBuf>,
}

fn cmd_search(cli: &Cli, a: &SearchArgs) -> Result<()> {
    let (exp, ds) = if let Some(path) = &a.config {
        let exp: ExperimentConfig = read_json(path)?;
        if !exp.dataset.exists() {
            return Err(Error::InvalidConfig(format!(
                "dataset path {} does not exist",
                exp.dataset.display()
            )));
        }
        let ds = load_dataset(&exp.dataset)?;
        (exp, ds)
    } else {
        let dataset = a.dataset.clone().expect("clap enforces dataset|config");
        let ds = load_dataset(&dataset)?;
        let fs = dataset_sample_rate(&ds)?;
        let classes: Vec<ActionLabel> = a
            .classes
            .as_deref()
            .unwrap_or(&[])
            .iter()
            .map(|s| s.parse())
            .collect::<Result<_>>()?;
        let mut search = SearchConfig::new(a.max_k.unwrap_or(ds.n_channels()));
        search.fspec = a.pipeline.fspec(fs);
        search.rms = a.pipeline.rms();
        search.repeats = a.repeats;
        search.split.train_fraction = a.train_fraction;
        search.split.seed = cli.seed();
        search.svm.seed = cli.seed();
        let exp = ExperimentConfig {
            dataset,
            classes,
            search,
            out: None,
        };
        (exp, ds)
    };
    if a.classes.as_ref().is_some_and(Vec::is_empty) {
        return Err(Error::InvalidConfig("class filter is empty".into()));
    }

    let ds = if exp.classes.is_empty() {
        ds
    } else {
        ds.filter_classes(&exp.classes)?
    };
    let out = exp.out.as_deref().unwrap_or(&cli.out);
    create_out_dir(out)?;

    let profiled = profile_dataset(&ds, &exp.search.fspec, &exp.search.rms)?;
    let report = search_profiled(&profiled, ds.classes(), &exp.search)?;

    if a.strict {
        let bad: u32 = report
            .results
            .iter()
            .map(|r| r.train_diag.nonconverged_pairs)
            .sum();
        if bad > 0 {
            return Err(Error::NotConverged(exp.search.svm.max_iter));
        }
    }

    let results_path = out.join("results.csv");
    let file = fs::File::create(&results_path)
        .map_err(|e| Error::io(format!("creating {}", results_path.display()), e))?;
    write_results_csv(&mut BufWriter::new(file), &report.results)?;
    let frontier_path = out.join("frontier.csv");
    let file = fs::File::create(&frontier_path)
        .map_err(|e| Error::io(format!("creating {}", frontier_path.display()), e))?;
    write_frontier_csv(&mut BufWriter::new(file), &report.frontier)?;

    println!(
        "searched {} subsets ({} classes, {} repeats) -> {} , {}",
        report.results.len(),
        ds.classes().len(),
        exp.search.repeats,
        results_path.display(),
        frontier_path.display()
    );
    for e in &report.frontier.entries {
        println!(
            "k={} best subset {} (normalizer {}) accuracy {:.4} +/- {:.4}",
            e.k(),
            format_subset(&e.subset),
            e.normalizer,
            e.accuracy,
            e.accuracy_sd
        );
    }
    if let (Some(best), Some(k)) = (report.frontier.best(), report.frontier.plateau_k(0.01)) {
        println!(
            "best overall: subset {} (normalizer {}) accuracy {:.4}; frontier plateaus \
             at k = {k} (within 0.01 of best)",
            format_subset(&best.subset),
            best.normalizer,
            best.accuracy
        );
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// cross-eval
// ---------------------------------------------------------------------------

fn cmd_cross_eval(cli: &Cli, a: &CrossEvalArgs) -> Result<()> {
    let datasets: Vec<Dataset> = a
        .datasets
        .iter()
        .map(|p| load_dataset(p))
        .collect::<Result<_>>()?;
    let names: Vec<String> = a
        .datasets
        .iter()
        .map(|p| {
            p.file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| p.display().to_string())
        })
        .collect();

    let fs = dataset_sample_rate(&datasets[0])?;
    let subset: Vec<usize> = a
        .subset
        .clone()
        .unwrap_or_else(|| (0..datasets[0].n_channels()).collect());
    let mut cfg = SearchConfig::new(datasets[0].n_channels());
    cfg.fspec = a.pipeline.fspec(fs);
    cfg.rms = a.pipeline.rms();
    cfg.svm.seed = cli.seed();
    cfg.split.seed = cli.seed();

    let n = datasets.len();
    let mut matrix = vec![vec![0.0; n]; n];
    for (i, train) in datasets.iter().enumerate() {
        for (j, test) in datasets.iter().enumerate() {
            matrix[i][j] = cross_condition_eval(train, test, &subset, &cfg)?;
        }
    }

    create_out_dir(&cli.out)?;
    let path = cli.out.join("cross_matrix.csv");
    let file = fs::File::create(&path)
        .map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e: std::io::Error| Error::io(format!("writing {}", path.display()), e);
    writeln!(w, "train,test,accuracy").map_err(io_err)?;
    for (i, row) in matrix.iter().enumerate() {
        for (j, acc) in row.iter().enumerate() {
            writeln!(w, "{},{},{acc:.6}", names[i], names[j]).map_err(io_err)?;
        }
    }
    w.flush().map_err(io_err)?;

    println!("cross-condition accuracy (rows = trained on, columns = tested on):");
    let width = names.iter().map(String::len).max().unwrap_or(0).max(5);
    print!("  {:width$}", "train");
    for name in &names {
        print!("  {name:>8.8}");
    }
    println!();
    for (i, row) in matrix.iter().enumerate() {
        print!("  {:width$}", names[i]);
        for acc in row {
            print!("  {acc:>8.4}");
        }
        println!();
    }
    println!("matrix -> {}", path.display());
    Ok(())
}
