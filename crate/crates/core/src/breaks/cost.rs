use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Segment cost families for penalized segmentation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CostKind {
    /// Sum of squared deviations from the segment mean.
    NormalMean,
    /// Gaussian negative log-likelihood with segment-specific mean and
    /// variance (scaled by 2 so it is comparable across segment lengths).
    NormalMeanVar,
}

impl CostKind {
    /// Shortest segment for which the cost is well-defined.
    pub fn min_segment_floor(&self) -> usize {
        match self {
            CostKind::NormalMean => 1,
            CostKind::NormalMeanVar => 2,
        }
    }

    /// Library default minimum segment length for this cost.
    pub fn default_min_segment(&self) -> usize {
        match self {
            CostKind::NormalMean => 2,
            CostKind::NormalMeanVar => 5,
        }
    }
}

// Keeps the meanvar log finite on exactly-constant segments.
const VARIANCE_FLOOR: f64 = 1e-12;

/// O(1) segment cost evaluation backed by prefix sums.
///
/// Values are centered on the global mean before accumulating, which makes
/// the normal-mean cost numerically stable under large level offsets
/// (segment RSS itself is translation invariant).
#[derive(Debug, Clone)]
pub struct SegmentCost {
    kind: CostKind,
    prefix: Vec<f64>,
    prefix_sq: Vec<f64>,
}

impl SegmentCost {
    pub fn new(kind: CostKind, series: &[f64]) -> Result<Self> {
        if let Some(i) = series.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        if series.is_empty() {
            return Err(Error::TooShort { need: 1, got: 0 });
        }
        let center = series.iter().sum::<f64>() / series.len() as f64;
        let mut prefix = Vec::with_capacity(series.len() + 1);
        let mut prefix_sq = Vec::with_capacity(series.len() + 1);
        prefix.push(0.0);
        prefix_sq.push(0.0);
        let (mut s, mut sq) = (0.0, 0.0);
        for v in series {
            let c = v - center;
            s += c;
            sq += c * c;
            prefix.push(s);
            prefix_sq.push(sq);
        }
        Ok(SegmentCost { kind, prefix, prefix_sq })
    }

    pub fn kind(&self) -> CostKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.prefix.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn rss(&self, start: usize, end: usize) -> f64 {
        let len = (end - start) as f64;
        let sum = self.prefix[end] - self.prefix[start];
        let sq = self.prefix_sq[end] - self.prefix_sq[start];
        (sq - sum * sum / len).max(0.0)
    }

    /// Cost of the half-open segment `[start, end)`.
    pub fn cost(&self, start: usize, end: usize) -> f64 {
        debug_assert!(start < end && end <= self.len());
        debug_assert!(end - start >= self.kind.min_segment_floor());
        match self.kind {
            CostKind::NormalMean => self.rss(start, end),
            CostKind::NormalMeanVar => {
                let len = (end - start) as f64;
                let sigma2 = (self.rss(start, end) / len).max(VARIANCE_FLOOR);
                len * ((2.0 * std::f64::consts::PI).ln() + sigma2.ln() + 1.0)
            }
        }
    }
}

/// Variance estimate from first differences; robust to slow trends and to
/// level shifts at the candidate breaks themselves.
pub fn diff_variance_estimate(series: &[f64]) -> f64 {
    if series.len() < 2 {
        return 0.0;
    }
    let diffs: Vec<f64> = series.windows(2).map(|w| w[1] - w[0]).collect();
    let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / diffs.len() as f64;
    var / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_mean_cost_matches_direct_rss() {
        let series = [1.0, 2.0, 4.0, 4.5, -1.0];
        let cost = SegmentCost::new(CostKind::NormalMean, &series).unwrap();
        let direct = |s: &[f64]| {
            let m = s.iter().sum::<f64>() / s.len() as f64;
            s.iter().map(|v| (v - m).powi(2)).sum::<f64>()
        };
        assert!((cost.cost(0, 5) - direct(&series)).abs() < 1e-12);
        assert!((cost.cost(1, 4) - direct(&series[1..4])).abs() < 1e-12);
        assert!((cost.cost(2, 3) - 0.0).abs() < 1e-12);
    }

    #[test]
    fn cost_is_translation_invariant() {
        let series = [1.0, 2.0, 4.0, 4.5, -1.0];
        let shifted: Vec<f64> = series.iter().map(|v| v + 1e6).collect();
        let a = SegmentCost::new(CostKind::NormalMean, &series).unwrap();
        let b = SegmentCost::new(CostKind::NormalMean, &shifted).unwrap();
        for s in 0..4 {
            for e in (s + 1)..=5 {
                assert!((a.cost(s, e) - b.cost(s, e)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn meanvar_cost_finite_on_constant_segment() {
        let series = [3.0; 10];
        let cost = SegmentCost::new(CostKind::NormalMeanVar, &series).unwrap();
        assert!(cost.cost(0, 10).is_finite());
        assert!(cost.cost(2, 7).is_finite());
    }

    #[test]
    fn non_finite_input_rejected() {
        assert!(SegmentCost::new(CostKind::NormalMean, &[1.0, f64::NAN]).is_err());
    }

    #[test]
    fn diff_variance_ignores_linear_trend() {
        let series: Vec<f64> = (0..100).map(|i| 0.5 * i as f64).collect();
        assert!(diff_variance_estimate(&series) < 1e-12);
    }
}
