//! Forecast accuracy metrics, correlation, residual diagnostics, and
//! comparative ranking across model variants.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Near-zero actuals are excluded from the percentage error rather than
/// failing the whole evaluation.
const MAPE_ACTUAL_FLOOR: f64 = 1e-9;

/// Accuracy summary for one model run. `mape` and `r_squared` are absent
/// when undefined (all-zero actuals, zero-variance actuals). Training time
/// is measured, never copied from elsewhere, and is optional so reports stay
/// byte-reproducible when timing is withheld.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub model: String,
    pub mae: f64,
    pub rmse: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mape: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_squared: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_seconds: Option<f64>,
    /// Timesteps excluded from MAPE because |actual| was below the floor.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub mape_excluded: usize,
}

fn is_zero(v: &usize) -> bool {
    *v == 0
}

/// MAE, RMSE, MAPE (percent), and R-squared of predictions against actuals.
pub fn compute_metrics(model: &str, actual: &[f64], predicted: &[f64]) -> Result<MetricsReport> {
    if actual.is_empty() || actual.len() != predicted.len() {
        return Err(Error::ShapeMismatch(format!(
            "actual length {} vs predicted length {}",
            actual.len(),
            predicted.len()
        )));
    }
    let n = actual.len() as f64;
    let mut abs_sum = 0.0;
    let mut sq_sum = 0.0;
    let mut pct_sum = 0.0;
    let mut pct_n = 0usize;
    for (a, p) in actual.iter().zip(predicted) {
        let e = a - p;
        abs_sum += e.abs();
        sq_sum += e * e;
        if a.abs() >= MAPE_ACTUAL_FLOOR {
            pct_sum += (e / a).abs();
            pct_n += 1;
        }
    }
    let mae = abs_sum / n;
    let rmse = (sq_sum / n).sqrt();
    let mape = (pct_n > 0).then(|| 100.0 * pct_sum / pct_n as f64);

    let mean = actual.iter().sum::<f64>() / n;
    let ss_tot: f64 = actual.iter().map(|a| (a - mean).powi(2)).sum();
    let r_squared = (ss_tot > 0.0).then(|| 1.0 - sq_sum / ss_tot);

    Ok(MetricsReport {
        model: model.to_string(),
        mae,
        rmse,
        mape,
        r_squared,
        train_seconds: None,
        mape_excluded: actual.len() - pct_n,
    })
}

/// Sample Pearson correlation coefficient.
pub fn pearson_corr(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::ShapeMismatch(format!(
            "need two equal-length series of at least 2 points, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return Err(Error::Degenerate("correlation of a constant series".into()));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Residual series plus an equal-width histogram and moment summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualSeries {
    /// actual - predicted, in input order.
    pub residuals: Vec<f64>,
    /// `bin_edges` has one more entry than `counts`.
    pub bin_edges: Vec<f64>,
    pub counts: Vec<usize>,
    pub mean: f64,
    pub std: f64,
    pub skewness: f64,
}

pub fn residual_report(actual: &[f64], predicted: &[f64], bins: usize) -> Result<ResidualSeries> {
    if actual.is_empty() || actual.len() != predicted.len() {
        return Err(Error::ShapeMismatch(format!(
            "actual length {} vs predicted length {}",
            actual.len(),
            predicted.len()
        )));
    }
    if bins == 0 {
        return Err(Error::invalid("histogram needs at least one bin"));
    }
    let residuals: Vec<f64> = actual.iter().zip(predicted).map(|(a, p)| a - p).collect();
    let n = residuals.len() as f64;
    let mean = residuals.iter().sum::<f64>() / n;
    let m2 = residuals.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
    let m3 = residuals.iter().map(|r| (r - mean).powi(3)).sum::<f64>() / n;
    let std = m2.sqrt();
    let skewness = if m2 > 0.0 { m3 / m2.powf(1.5) } else { 0.0 };

    let lo = residuals.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = residuals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut counts = vec![0usize; bins];
    let width = (hi - lo) / bins as f64;
    for r in &residuals {
        let idx = if width > 0.0 { (((r - lo) / width) as usize).min(bins - 1) } else { 0 };
        counts[idx] += 1;
    }
    let bin_edges: Vec<f64> = (0..=bins).map(|i| lo + width * i as f64).collect();
    Ok(ResidualSeries { residuals, bin_edges, counts, mean, std, skewness })
}

/// Ascending by RMSE, ties broken by MAE; stable under input permutation.
pub fn rank_models(reports: &[MetricsReport]) -> Result<Vec<MetricsReport>> {
    if reports.is_empty() {
        return Err(Error::invalid("nothing to rank"));
    }
    let mut sorted = reports.to_vec();
    sorted.sort_by(|a, b| {
        (a.rmse, a.mae, a.model.as_str())
            .partial_cmp(&(b.rmse, b.mae, b.model.as_str()))
            .expect("finite metrics")
    });
    Ok(sorted)
}

/// Aligned-column comparison table for a ranking.
pub fn ranking_table(reports: &[MetricsReport]) -> String {
    let mut out = String::from(
        "model                        MAE       RMSE    MAPE(%)        R2    train(s)\n",
    );
    for r in reports {
        let fmt_opt = |v: Option<f64>| match v {
            Some(x) => format!("{x:>9.4}"),
            None => format!("{:>9}", "-"),
        };
        out.push_str(&format!(
            "{:<24} {:>9.4} {:>9.4} {} {} {}\n",
            r.model,
            r.mae,
            r.rmse,
            fmt_opt(r.mape),
            fmt_opt(r.r_squared),
            fmt_opt(r.train_seconds),
        ));
    }
    out
}

/// Percent reduction per metric from `reference` to `candidate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Improvement {
    pub mae_reduction_pct: f64,
    pub rmse_reduction_pct: f64,
}

pub fn improvement(reference: &MetricsReport, candidate: &MetricsReport) -> Result<Improvement> {
    if reference.mae <= 0.0 || reference.rmse <= 0.0 {
        return Err(Error::Degenerate("reference metrics must be positive".into()));
    }
    Ok(Improvement {
        mae_reduction_pct: 100.0 * (reference.mae - candidate.mae) / reference.mae,
        rmse_reduction_pct: 100.0 * (reference.rmse - candidate.rmse) / reference.rmse,
    })
}
