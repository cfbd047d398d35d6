use std::path::{Path, PathBuf};

use breakcast_core::breaks::{BaiPerronConfig, CostKind, Penalty, PeltConfig};
use breakcast_core::ingest::{CsvSchema, FeatureSelect};
use breakcast_core::neural::{ModelKind, TrainingConfig};
use breakcast_core::wavelet::{BoundaryMode, WaveletFamily};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Model variants selectable in a run. The `lstm-uni` variant feeds only the
/// denoised target and regime one-hots; the others add every feature column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Architecture {
    LstmUni,
    LstmMulti,
    Gru,
    Tcn,
}

impl Architecture {
    pub fn tag(&self) -> &'static str {
        match self {
            Architecture::LstmUni => "lstm-uni",
            Architecture::LstmMulti => "lstm-multi",
            Architecture::Gru => "gru",
            Architecture::Tcn => "tcn",
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            Architecture::LstmUni | Architecture::LstmMulti => ModelKind::Lstm,
            Architecture::Gru => ModelKind::Gru,
            Architecture::Tcn => ModelKind::Tcn,
        }
    }

    pub fn univariate(&self) -> bool {
        matches!(self, Architecture::LstmUni)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BreakMethodChoice {
    Pelt,
    Bp,
    Icss,
    #[serde(rename = "bp+icss")]
    BpIcss,
}

/// Regime labels for the test period: recompute breaks on the full series
/// (reproduction mode) or freeze those found in the training window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegimeLeakage {
    Full,
    Frozen,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetMode {
    Denoised,
    Raw,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PeltSettings {
    /// Explicit penalty; absent means the BIC-style default per series.
    pub penalty: Option<f64>,
    pub min_segment: usize,
    pub cost: CostKind,
}

impl Default for PeltSettings {
    fn default() -> Self {
        PeltSettings { penalty: None, min_segment: 2, cost: CostKind::NormalMean }
    }
}

impl PeltSettings {
    pub fn to_config(&self) -> PeltConfig {
        PeltConfig {
            penalty: match self.penalty {
                Some(v) => Penalty::Value(v),
                None => Penalty::Bic,
            },
            min_segment: self.min_segment,
            cost: self.cost,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct IcssSettings {
    pub critical: f64,
    /// Scan first differences instead of levels (levels assume a flat mean).
    pub on_returns: bool,
}

impl Default for IcssSettings {
    fn default() -> Self {
        IcssSettings { critical: breakcast_core::breaks::ICSS_DEFAULT_CRITICAL, on_returns: true }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct WaveletSettings {
    pub family: WaveletFamily,
    pub levels: usize,
    pub mode: BoundaryMode,
}

impl Default for WaveletSettings {
    fn default() -> Self {
        WaveletSettings { family: WaveletFamily::Db4, levels: 1, mode: BoundaryMode::Symmetric }
    }
}

/// One JSON document describing an entire run; every field has a default.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub input: PathBuf,
    pub date_column: String,
    pub target_column: String,
    /// Explicit feature columns; absent means every numeric column.
    pub feature_columns: Option<Vec<String>>,
    pub train_fraction: f64,
    pub break_method: BreakMethodChoice,
    pub pelt: PeltSettings,
    pub bai_perron: BaiPerronConfig,
    pub icss: IcssSettings,
    /// Breaks from the two methods closer than this are merged.
    pub combine_min_gap: usize,
    pub wavelet: WaveletSettings,
    pub window: usize,
    pub stride: usize,
    pub architectures: Vec<Architecture>,
    pub training: TrainingConfig,
    pub seed: u64,
    pub output_root: Option<PathBuf>,
    pub regime_leakage: RegimeLeakage,
    pub target_mode: TargetMode,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            input: PathBuf::from("data.csv"),
            date_column: "date".into(),
            target_column: "price".into(),
            feature_columns: None,
            train_fraction: 0.8,
            break_method: BreakMethodChoice::Pelt,
            pelt: PeltSettings::default(),
            bai_perron: BaiPerronConfig::default(),
            icss: IcssSettings::default(),
            combine_min_gap: 10,
            wavelet: WaveletSettings::default(),
            window: 30,
            stride: 1,
            architectures: vec![Architecture::Tcn],
            training: TrainingConfig::default(),
            seed: 42,
            output_root: None,
            regime_leakage: RegimeLeakage::Frozen,
            target_mode: TargetMode::Denoised,
        }
    }
}

impl RunConfig {
    pub fn schema(&self) -> CsvSchema {
        CsvSchema {
            date_column: self.date_column.clone(),
            target_column: self.target_column.clone(),
            features: match &self.feature_columns {
                Some(names) => FeatureSelect::Named(names.clone()),
                None => FeatureSelect::Auto,
            },
        }
    }

    /// Training configuration with the run seed applied.
    pub fn resolved_training(&self) -> TrainingConfig {
        let mut t = self.training.clone();
        t.seed = self.seed;
        t
    }
}

/// Loads the config JSON and applies `--dotted.path value` overrides.
pub fn load_config(path: &Path, overrides: &[String]) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let mut value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("config {} is not valid JSON: {e}", path.display())))?;
    apply_overrides(&mut value, overrides)?;
    serde_json::from_value(value).map_err(|e| CliError::Usage(format!("invalid config: {e}")))
}

pub fn config_from_overrides(overrides: &[String]) -> Result<RunConfig, CliError> {
    let mut value = serde_json::to_value(RunConfig::default()).expect("default serializes");
    apply_overrides(&mut value, overrides)?;
    serde_json::from_value(value).map_err(|e| CliError::Usage(format!("invalid config: {e}")))
}

fn apply_overrides(root: &mut serde_json::Value, overrides: &[String]) -> Result<(), CliError> {
    let mut it = overrides.iter();
    while let Some(raw_key) = it.next() {
        let key = raw_key
            .strip_prefix("--")
            .ok_or_else(|| CliError::Usage(format!("expected --key, got '{raw_key}'")))?;
        let raw_value = it
            .next()
            .ok_or_else(|| CliError::Usage(format!("override --{key} is missing a value")))?;
        let parsed = parse_override_value(raw_value);
        set_path(root, key, parsed)
            .map_err(|e| CliError::Usage(format!("override --{key}: {e}")))?;
    }
    Ok(())
}

// Numbers, booleans, null, and JSON arrays/objects pass through as JSON;
// anything else is a string.
fn parse_override_value(raw: &str) -> serde_json::Value {
    match raw {
        "null" => serde_json::Value::Null,
        "true" => serde_json::Value::Bool(true),
        "false" => serde_json::Value::Bool(false),
        _ => {
            if let Ok(n) = raw.parse::<i64>() {
                return serde_json::Value::from(n);
            }
            if let Ok(f) = raw.parse::<f64>() {
                return serde_json::Value::from(f);
            }
            if raw.starts_with('[') || raw.starts_with('{') {
                if let Ok(v) = serde_json::from_str(raw) {
                    return v;
                }
            }
            serde_json::Value::String(raw.to_string())
        }
    }
}

fn set_path(root: &mut serde_json::Value, path: &str, value: serde_json::Value) -> Result<(), String> {
    let mut cursor = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let object = cursor
            .as_object_mut()
            .ok_or_else(|| format!("'{}' is not an object", parts[..i].join(".")))?;
        if i + 1 == parts.len() {
            object.insert(part.to_string(), value);
            return Ok(());
        }
        cursor = object.entry(part.to_string()).or_insert_with(|| serde_json::json!({}));
    }
    Err("empty override path".into())
}
