//! Structural breakpoint detection: penalized segmentation (PELT), segmented
//! regression with sequential sup-F selection, and iterated cumulative
//! sum-of-squares variance scans.

mod bai_perron;
mod cost;
mod icss;
mod pelt;

pub use bai_perron::{bai_perron_detect, BaiPerronConfig};
pub use cost::{diff_variance_estimate, CostKind, SegmentCost};
pub use icss::{
    icss_detect, icss_detect_returns, icss_scan, IcssScan, ICSS_DEFAULT_CRITICAL, ICSS_MIN_LEN,
};
pub use pelt::{optimal_partition_bruteforce, pelt_detect, Penalty, PeltConfig, BRUTEFORCE_MAX_LEN};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::FeatureFrame;

/// Which detector produced a breakpoint set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BreakMethod {
    Pelt,
    BaiPerron,
    Icss,
    Combined,
}

/// Detected break positions over one series.
///
/// Each index is the position where a new segment begins, so segments are
/// `[0, i1)`, `[i1, i2)`, ..., `[im, n)`. Indices are strictly increasing and
/// lie in `(0, n)`. `statistics`, when present, aligns with `indices` and
/// carries the detector's per-break score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakpointSet {
    pub indices: Vec<usize>,
    pub method: BreakMethod,
    pub statistics: Option<Vec<f64>>,
}

impl BreakpointSet {
    pub fn empty(method: BreakMethod) -> Self {
        BreakpointSet { indices: vec![], method, statistics: None }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Checks ordering and range against a series of length `n`.
    pub fn validate(&self, n: usize) -> Result<()> {
        let mut last = 0;
        for &idx in &self.indices {
            if idx <= last || idx >= n {
                return Err(Error::invalid(format!(
                    "break index {idx} out of order or outside (0, {n})"
                )));
            }
            last = idx;
        }
        if let Some(stats) = &self.statistics {
            if stats.len() != self.indices.len() {
                return Err(Error::invalid("statistics length differs from indices"));
            }
        }
        Ok(())
    }
}

/// Union of mean-shift and variance-shift breaks. Indices closer than
/// `min_gap` to an already-kept earlier index are merged into it.
pub fn combine_bp_icss(
    bp: &BreakpointSet,
    icss: &BreakpointSet,
    min_gap: usize,
    series_len: usize,
) -> Result<BreakpointSet> {
    bp.validate(series_len)?;
    icss.validate(series_len)?;
    let mut merged: Vec<usize> = bp.indices.iter().chain(&icss.indices).copied().collect();
    merged.sort_unstable();
    merged.dedup();
    let mut kept: Vec<usize> = Vec::with_capacity(merged.len());
    for idx in merged {
        match kept.last() {
            Some(&prev) if idx - prev < min_gap => {}
            _ => kept.push(idx),
        }
    }
    Ok(BreakpointSet { indices: kept, method: BreakMethod::Combined, statistics: None })
}

/// Independent PELT run on every column of the frame (target first, then
/// features in declared order). Column errors are reported with the column
/// name attached.
pub fn detect_per_feature(
    frame: &FeatureFrame,
    config: &PeltConfig,
) -> Result<Vec<(String, BreakpointSet)>> {
    let mut out = Vec::with_capacity(1 + frame.feature_names().len());
    for (name, column) in frame.named_columns() {
        let set = pelt_detect(column, config)
            .map_err(|e| Error::invalid(format!("column '{name}': {e}")))?;
        out.push((name.to_string(), set));
    }
    Ok(out)
}
