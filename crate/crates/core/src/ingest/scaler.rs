use serde::{Deserialize, Serialize};

use super::frame::FeatureFrame;
use crate::error::{Error, Result};

/// Per-column z-score statistics (population moments).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub name: String,
    pub mean: f64,
    pub std: f64,
    /// Column had (numerically) zero spread and is passed through unchanged.
    pub constant: bool,
}

/// Column-wise standardization fitted on training rows only. The target
/// column is always the first entry, so predictions can be mapped back to
/// original units.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    columns: Vec<ColumnStats>,
}

fn stats_of(name: &str, values: &[f64]) -> ColumnStats {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    let constant = std <= 1e-12 * (mean.abs() + 1.0);
    ColumnStats { name: name.to_string(), mean, std, constant }
}

/// Fit per-column statistics on the (training) frame.
pub fn fit_scaler(train: &FeatureFrame) -> Scaler {
    Scaler { columns: train.named_columns().map(|(name, col)| stats_of(name, col)).collect() }
}

impl Scaler {
    pub fn is_fitted(&self) -> bool {
        !self.columns.is_empty()
    }

    pub fn columns(&self) -> &[ColumnStats] {
        &self.columns
    }

    fn column(&self, name: &str) -> Result<&ColumnStats> {
        if !self.is_fitted() {
            return Err(Error::UnfittedScaler);
        }
        self.columns
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| Error::ShapeMismatch(format!("scaler has no column '{name}'")))
    }

    pub fn target_stats(&self) -> Result<&ColumnStats> {
        if !self.is_fitted() {
            return Err(Error::UnfittedScaler);
        }
        Ok(&self.columns[0])
    }

    /// Standardize one named column; constant columns pass through.
    pub fn transform_column(&self, name: &str, values: &[f64]) -> Result<Vec<f64>> {
        let stats = self.column(name)?;
        if stats.constant {
            return Ok(values.to_vec());
        }
        Ok(values.iter().map(|v| (v - stats.mean) / stats.std).collect())
    }

    /// Inverse of [`Scaler::transform_column`] for the target column.
    pub fn inverse_target(&self, values: &[f64]) -> Result<Vec<f64>> {
        let stats = self.target_stats()?;
        if stats.constant {
            return Ok(values.to_vec());
        }
        Ok(values.iter().map(|v| v * stats.std + stats.mean).collect())
    }

    /// Standardize every column of a frame. Column names must match the
    /// fitted statistics.
    pub fn apply(&self, frame: &FeatureFrame) -> Result<FeatureFrame> {
        if !self.is_fitted() {
            return Err(Error::UnfittedScaler);
        }
        let target = self.transform_column(frame.target_name(), frame.target())?;
        let mut features = Vec::with_capacity(frame.feature_names().len());
        for (name, col) in frame.feature_names().iter().zip(frame.feature_columns()) {
            features.push(self.transform_column(name, col)?);
        }
        FeatureFrame::new(
            frame.timestamps().to_vec(),
            frame.target_name().to_string(),
            target,
            frame.feature_names().to_vec(),
            features,
        )
    }
}
