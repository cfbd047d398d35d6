use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use breakcast_core::breaks::{
    bai_perron_detect, combine_bp_icss, detect_per_feature, icss_detect, icss_detect_returns,
    pelt_detect, BreakpointSet,
};
use breakcast_core::eval::{
    compute_metrics, rank_models, ranking_table, residual_report, MetricsReport,
};
use breakcast_core::ingest::{
    build_windows, encode_regimes, fit_scaler, load_csv, split_chronological, FeatureFrame,
    RegimeLabels, Scaler, SplitSpec, WindowedDataset,
};
use breakcast_core::neural::{predict, train, Checkpoint, TrainedModel};
use breakcast_core::wavelet::denoise;
use serde::Serialize;

use crate::config::{Architecture, BreakMethodChoice, RegimeLeakage, RunConfig, TargetMode};
use crate::manifest::{create_run_dir, write_manifest, RunLock};
use crate::CliError;

impl From<breakcast_core::Error> for CliError {
    fn from(e: breakcast_core::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

/// Everything the modeling stages need, assembled once per run.
struct PreparedData {
    frame: FeatureFrame,
    boundary: usize,
    breaks: BreakpointSet,
    regimes: RegimeLabels,
    denoised: Vec<f64>,
    scaler: Scaler,
    scaled_denoised: Vec<f64>,
    scaled_features: Vec<Vec<f64>>,
    /// Target series actually predicted (denoised or raw), original units.
    target_actuals: Vec<f64>,
    scaled_target: Vec<f64>,
}

fn check_input(config: &RunConfig) -> Result<(), CliError> {
    if !config.input.exists() {
        return Err(CliError::Usage(format!(
            "input file {} does not exist",
            config.input.display()
        )));
    }
    Ok(())
}

fn detect_series(series: &[f64], config: &RunConfig) -> Result<BreakpointSet, CliError> {
    let set = match config.break_method {
        BreakMethodChoice::Pelt => pelt_detect(series, &config.pelt.to_config())?,
        BreakMethodChoice::Bp => bai_perron_detect(series, None, &config.bai_perron)?,
        BreakMethodChoice::Icss => {
            if config.icss.on_returns {
                icss_detect_returns(series, config.icss.critical)?
            } else {
                icss_detect(series, config.icss.critical)?
            }
        }
        BreakMethodChoice::BpIcss => {
            let bp = bai_perron_detect(series, None, &config.bai_perron)?;
            let variance = if config.icss.on_returns {
                icss_detect_returns(series, config.icss.critical)?
            } else {
                icss_detect(series, config.icss.critical)?
            };
            combine_bp_icss(&bp, &variance, config.combine_min_gap, series.len())?
        }
    };
    Ok(set)
}

fn prepare(config: &RunConfig) -> Result<PreparedData, CliError> {
    check_input(config)?;
    let frame = load_csv(&config.input, &config.schema())?;
    let split = SplitSpec {
        train_fraction: config.train_fraction,
        validation_fraction: config.training.validation_fraction,
    };
    let (train_frame, _) = split_chronological(&frame, &split)?;
    let boundary = train_frame.len();

    let detect_on: &[f64] = match config.regime_leakage {
        RegimeLeakage::Frozen => &frame.target()[..boundary],
        RegimeLeakage::Full => frame.target(),
    };
    let breaks = detect_series(detect_on, config)?;
    let regimes = encode_regimes(&breaks, frame.len())?;

    let denoised = denoise(
        frame.target(),
        config.wavelet.family,
        config.wavelet.levels,
        config.wavelet.mode,
    )?;
    let denoised_frame = frame.with_target(denoised.clone())?;
    let scaler = fit_scaler(&denoised_frame.slice(0..boundary));
    let scaled_denoised = scaler.transform_column(frame.target_name(), &denoised)?;
    let mut scaled_features = Vec::with_capacity(frame.feature_names().len());
    for (name, col) in frame.feature_names().iter().zip(frame.feature_columns()) {
        scaled_features.push(scaler.transform_column(name, col)?);
    }
    let target_actuals = match config.target_mode {
        TargetMode::Denoised => denoised.clone(),
        TargetMode::Raw => frame.target().to_vec(),
    };
    let scaled_target = scaler.transform_column(frame.target_name(), &target_actuals)?;

    Ok(PreparedData {
        frame,
        boundary,
        breaks,
        regimes,
        denoised,
        scaler,
        scaled_denoised,
        scaled_features,
        target_actuals,
        scaled_target,
    })
}

fn dataset_for(
    p: &PreparedData,
    config: &RunConfig,
    univariate: bool,
) -> Result<WindowedDataset, CliError> {
    let features: Vec<&[f64]> = if univariate {
        vec![]
    } else {
        p.scaled_features.iter().map(|c| c.as_slice()).collect()
    };
    Ok(build_windows(
        &p.scaled_denoised,
        &features,
        &p.regimes,
        config.window,
        config.stride,
        Some(&p.scaled_target),
    )?)
}

fn method_label(config: &RunConfig) -> &'static str {
    match config.break_method {
        BreakMethodChoice::Pelt => "PELT",
        BreakMethodChoice::Bp => "BP",
        BreakMethodChoice::Icss => "ICSS",
        BreakMethodChoice::BpIcss => "BP&ICSS",
    }
}

fn model_label(config: &RunConfig, arch: Architecture) -> String {
    let arch_name = match arch {
        Architecture::LstmUni => "LSTM(uni)",
        Architecture::LstmMulti => "LSTM(multi)",
        Architecture::Gru => "GRU",
        Architecture::Tcn => "TCN",
    };
    format!("{}-WT-{}", method_label(config), arch_name)
}

#[derive(Serialize)]
struct BreakRecord {
    index: usize,
    date: String,
    method: breakcast_core::breaks::BreakMethod,
    statistic: Option<f64>,
}

fn break_records(frame: &FeatureFrame, set: &BreakpointSet) -> Vec<BreakRecord> {
    set.indices
        .iter()
        .enumerate()
        .map(|(i, &idx)| BreakRecord {
            index: idx,
            date: frame.timestamps()[idx].to_string(),
            method: set.method,
            statistic: set.statistics.as_ref().map(|s| s[i]).filter(|v| v.is_finite()),
        })
        .collect()
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let json = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
    fs::write(path, json).map_err(|e| CliError::Runtime(e.to_string()))?;
    Ok(())
}

fn config_json(config: &RunConfig) -> String {
    serde_json::to_string_pretty(config).expect("config serializes")
}

/// Detected breakpoints for every column of the input, as JSON keyed by
/// column name. Runs the configured method on the full series of each
/// column (exploratory report, not the leakage-controlled model path).
pub fn cmd_detect(config: &RunConfig, root: &Path) -> Result<PathBuf, CliError> {
    check_input(config)?;
    let _lock = RunLock::acquire(root)?;
    let dir = create_run_dir(root, "detect")?;
    let frame = load_csv(&config.input, &config.schema())?;
    let mut map: BTreeMap<String, Vec<BreakRecord>> = BTreeMap::new();
    match config.break_method {
        BreakMethodChoice::Pelt => {
            for (name, set) in detect_per_feature(&frame, &config.pelt.to_config())? {
                map.insert(name, break_records(&frame, &set));
            }
        }
        _ => {
            for (name, column) in frame.named_columns() {
                let set = detect_series(column, config)
                    .map_err(|e| CliError::Runtime(format!("column '{name}': {e}")))?;
                map.insert(name.to_string(), break_records(&frame, &set));
            }
        }
    }
    write_json(&dir.join("breaks.json"), &map)?;
    write_manifest(&dir, "detect", config.seed, &config_json(config))?;
    Ok(dir)
}

/// Wavelet-denoised target exported as CSV (date, raw, denoised).
pub fn cmd_denoise(config: &RunConfig, root: &Path) -> Result<PathBuf, CliError> {
    check_input(config)?;
    let _lock = RunLock::acquire(root)?;
    let dir = create_run_dir(root, "denoise")?;
    let frame = load_csv(&config.input, &config.schema())?;
    let denoised = denoise(
        frame.target(),
        config.wavelet.family,
        config.wavelet.levels,
        config.wavelet.mode,
    )?;
    let mut csv = String::from("date,raw,denoised\n");
    for i in 0..frame.len() {
        writeln!(csv, "{},{},{}", frame.timestamps()[i], frame.target()[i], denoised[i])
            .expect("string write");
    }
    fs::write(dir.join("denoised.csv"), csv).map_err(|e| CliError::Runtime(e.to_string()))?;
    write_manifest(&dir, "denoise", config.seed, &config_json(config))?;
    Ok(dir)
}

#[derive(Serialize)]
struct HistoryFile {
    architecture: String,
    wall_clock_seconds: f64,
    history: Vec<breakcast_core::neural::EpochStats>,
}

fn train_one(
    p: &PreparedData,
    config: &RunConfig,
    arch: Architecture,
) -> Result<(TrainedModel, WindowedDataset, WindowedDataset), CliError> {
    let dataset = dataset_for(p, config, arch.univariate())?;
    let (train_ds, test_ds) = dataset.split_at_boundary(p.boundary);
    if train_ds.is_empty() || test_ds.is_empty() {
        return Err(CliError::Runtime(format!(
            "window {} over {} rows leaves train/test windows empty at boundary {}",
            config.window,
            p.frame.len(),
            p.boundary
        )));
    }
    let trained = train(arch.kind(), &train_ds, &config.resolved_training())?
        .with_scaler(p.scaler.clone());
    Ok((trained, train_ds, test_ds))
}

fn save_model(dir: &Path, arch: Architecture, trained: &TrainedModel) -> Result<(), CliError> {
    let checkpoint = Checkpoint::from_trained(trained);
    checkpoint.save(&dir.join(format!("checkpoint-{}.json", arch.tag())))?;
    let history = HistoryFile {
        architecture: arch.tag().to_string(),
        wall_clock_seconds: trained.wall_clock_seconds,
        history: trained.history.clone(),
    };
    write_json(&dir.join(format!("history-{}.json", arch.tag())), &history)
}

/// Evaluation artifacts for one trained model on the test windows: metrics
/// JSON (timing withheld so reruns are byte-identical) and a residual CSV.
fn evaluate_to_dir(
    dir: &Path,
    p: &PreparedData,
    config: &RunConfig,
    arch: Architecture,
    trained: &TrainedModel,
    test_ds: &WindowedDataset,
) -> Result<MetricsReport, CliError> {
    let preds = predict(trained, test_ds)?;
    let actual: Vec<f64> =
        preds.index_map.iter().map(|&t| p.target_actuals[t]).collect();
    let mut report = compute_metrics(&model_label(config, arch), &actual, &preds.values)?;
    report.train_seconds = None;
    write_json(&dir.join(format!("metrics-{}.json", arch.tag())), &report)?;

    let residuals = residual_report(&actual, &preds.values, 30)?;
    let mut csv = String::from("date,actual,predicted,residual\n");
    for (i, &t) in preds.index_map.iter().enumerate() {
        writeln!(
            csv,
            "{},{},{},{}",
            p.frame.timestamps()[t],
            actual[i],
            preds.values[i],
            residuals.residuals[i]
        )
        .expect("string write");
    }
    fs::write(dir.join(format!("residuals-{}.csv", arch.tag())), csv)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    Ok(report)
}

/// Train every listed architecture; writes checkpoints and histories.
pub fn cmd_train(config: &RunConfig, root: &Path) -> Result<PathBuf, CliError> {
    if config.architectures.is_empty() {
        return Err(CliError::Usage("no architectures listed in config".into()));
    }
    let p = prepare(config)?;
    let _lock = RunLock::acquire(root)?;
    let dir = create_run_dir(root, "train")?;
    let mut timings: BTreeMap<String, f64> = BTreeMap::new();
    for &arch in &config.architectures {
        let (trained, _, _) = train_one(&p, config, arch)?;
        save_model(&dir, arch, &trained)?;
        timings.insert(arch.tag().to_string(), trained.wall_clock_seconds);
    }
    write_json(&dir.join("timings.json"), &timings)?;
    write_manifest(&dir, "train", config.seed, &config_json(config))?;
    Ok(dir)
}

/// Evaluate a saved checkpoint against the test split defined by the config.
pub fn cmd_evaluate(
    config: &RunConfig,
    checkpoint_path: &Path,
    root: &Path,
) -> Result<PathBuf, CliError> {
    if !checkpoint_path.exists() {
        return Err(CliError::Usage(format!(
            "checkpoint {} does not exist",
            checkpoint_path.display()
        )));
    }
    let p = prepare(config)?;
    let checkpoint = Checkpoint::load(checkpoint_path)?;
    let univariate = checkpoint.layout.features == 0;
    let kind = checkpoint.architecture;
    let trained = checkpoint.into_trained()?;
    let arch = match (kind, univariate) {
        (breakcast_core::neural::ModelKind::Lstm, true) => Architecture::LstmUni,
        (breakcast_core::neural::ModelKind::Lstm, false) => Architecture::LstmMulti,
        (breakcast_core::neural::ModelKind::Gru, _) => Architecture::Gru,
        (breakcast_core::neural::ModelKind::Tcn, _) => Architecture::Tcn,
    };
    let dataset = dataset_for(&p, config, univariate)?;
    let (_, test_ds) = dataset.split_at_boundary(p.boundary);
    if test_ds.is_empty() {
        return Err(CliError::Runtime("no test windows for this configuration".into()));
    }

    let _lock = RunLock::acquire(root)?;
    let dir = create_run_dir(root, "evaluate")?;
    evaluate_to_dir(&dir, &p, config, arch, &trained, &test_ds)?;
    write_manifest(&dir, "evaluate", config.seed, &config_json(config))?;
    Ok(dir)
}

/// Full run: detect, denoise, window, train and evaluate every listed
/// architecture (sequentially, in config order), rank the results.
pub fn cmd_pipeline(config: &RunConfig, root: &Path) -> Result<PathBuf, CliError> {
    if config.architectures.is_empty() {
        return Err(CliError::Usage("no architectures listed in config".into()));
    }
    let p = prepare(config)?;
    let _lock = RunLock::acquire(root)?;
    let dir = create_run_dir(root, "pipeline")?;

    let mut breaks_map: BTreeMap<String, Vec<BreakRecord>> = BTreeMap::new();
    breaks_map.insert(p.frame.target_name().to_string(), break_records(&p.frame, &p.breaks));
    write_json(&dir.join("breaks.json"), &breaks_map)?;

    let mut csv = String::from("date,raw,denoised\n");
    for i in 0..p.frame.len() {
        writeln!(csv, "{},{},{}", p.frame.timestamps()[i], p.frame.target()[i], p.denoised[i])
            .expect("string write");
    }
    fs::write(dir.join("denoised.csv"), csv).map_err(|e| CliError::Runtime(e.to_string()))?;

    let mut reports = Vec::new();
    let mut timings: BTreeMap<String, f64> = BTreeMap::new();
    for &arch in &config.architectures {
        let (trained, _, test_ds) = train_one(&p, config, arch)?;
        save_model(&dir, arch, &trained)?;
        let report = evaluate_to_dir(&dir, &p, config, arch, &trained, &test_ds)?;
        timings.insert(arch.tag().to_string(), trained.wall_clock_seconds);
        let mut with_time = report;
        with_time.train_seconds = Some(trained.wall_clock_seconds);
        reports.push(with_time);
    }
    write_json(&dir.join("timings.json"), &timings)?;

    let ranked = rank_models(&reports)?;
    fs::write(dir.join("ranking.txt"), ranking_table(&ranked))
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let ranked_deterministic: Vec<MetricsReport> = ranked
        .into_iter()
        .map(|mut r| {
            r.train_seconds = None;
            r
        })
        .collect();
    write_json(&dir.join("ranking.json"), &ranked_deterministic)?;
    write_manifest(&dir, "pipeline", config.seed, &config_json(config))?;
    Ok(dir)
}
