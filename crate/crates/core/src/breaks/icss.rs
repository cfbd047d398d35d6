use super::{BreakMethod, BreakpointSet};
use crate::error::{Error, Result};

/// Asymptotic 95% critical value for `sup sqrt(T/2)|D_k|` (the supremum of a
/// Brownian bridge in absolute value).
pub const ICSS_DEFAULT_CRITICAL: f64 = 1.358;

/// Shortest stretch the variance scan will analyze.
pub const ICSS_MIN_LEN: usize = 8;

/// One centered cumulative sum-of-squares scan over a stretch of data.
#[derive(Debug, Clone)]
pub struct IcssScan {
    /// Cumulative sums of squares, `c[0] = 0 ..= c[T]`.
    pub cumulative: Vec<f64>,
    /// Normalized deviations `d[k] = c[k]/c[T] - k/T`; `d[0] = d[T] = 0`.
    pub deviations: Vec<f64>,
    /// `sqrt(T/2) * |d[k*]|` at the maximizing interior index.
    pub statistic: f64,
    /// Maximizing `k` (1-based count of observations before the split).
    pub argmax: usize,
}

/// Computes the deviation sequence for the squared values of `stretch`.
/// Returns `None` when the stretch carries no sum-of-squares mass.
pub fn icss_scan(stretch: &[f64]) -> Option<IcssScan> {
    let t = stretch.len();
    let mut cumulative = Vec::with_capacity(t + 1);
    cumulative.push(0.0);
    let mut acc = 0.0;
    for v in stretch {
        acc += v * v;
        cumulative.push(acc);
    }
    let total = acc;
    if !(total > 0.0) {
        return None;
    }
    let mut deviations = Vec::with_capacity(t + 1);
    let mut statistic = 0.0;
    let mut argmax = 0;
    for (k, c) in cumulative.iter().enumerate() {
        let d = c / total - k as f64 / t as f64;
        if k > 0 && k < t && d.abs() > statistic {
            statistic = d.abs();
            argmax = k;
        }
        deviations.push(d);
    }
    statistic *= (t as f64 / 2.0).sqrt();
    Some(IcssScan { cumulative, deviations, statistic, argmax })
}

fn recurse(values: &[f64], offset: usize, critical: f64, out: &mut Vec<(usize, f64)>) {
    if values.len() < ICSS_MIN_LEN {
        return;
    }
    let Some(scan) = icss_scan(values) else { return };
    if scan.statistic <= critical {
        return;
    }
    let k = scan.argmax;
    out.push((offset + k, scan.statistic));
    recurse(&values[..k], offset, critical, out);
    recurse(&values[k..], offset + k, critical, out);
}

/// Variance-break detection by iterated cumulative sum-of-squares scans.
///
/// The series is centered on its mean once; each stretch whose deviation
/// statistic exceeds `critical` is split at the maximizing index and both
/// halves are re-scanned until no exceedance remains. Assumes a constant
/// mean; apply to first differences when the level drifts (see
/// [`icss_detect_returns`]).
pub fn icss_detect(series: &[f64], critical: f64) -> Result<BreakpointSet> {
    if series.len() < ICSS_MIN_LEN {
        return Err(Error::TooShort { need: ICSS_MIN_LEN, got: series.len() });
    }
    if let Some(i) = series.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    if !(critical > 0.0) {
        return Err(Error::invalid(format!("critical value must be positive, got {critical}")));
    }
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    let variance = series.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    if !(variance > 0.0) {
        return Err(Error::Degenerate("series has zero variance".into()));
    }
    let centered: Vec<f64> = series.iter().map(|v| v - mean).collect();

    let mut found: Vec<(usize, f64)> = Vec::new();
    recurse(&centered, 0, critical, &mut found);
    found.sort_unstable_by_key(|(idx, _)| *idx);
    let (indices, statistics): (Vec<usize>, Vec<f64>) = found.into_iter().unzip();
    Ok(BreakpointSet { indices, method: BreakMethod::Icss, statistics: Some(statistics) })
}

/// Runs the variance scan on first differences and maps break positions back
/// to the level series (a change starting at return `k` first affects level
/// observation `k + 1`).
pub fn icss_detect_returns(series: &[f64], critical: f64) -> Result<BreakpointSet> {
    if series.len() < ICSS_MIN_LEN + 1 {
        return Err(Error::TooShort { need: ICSS_MIN_LEN + 1, got: series.len() });
    }
    let returns: Vec<f64> = series.windows(2).map(|w| w[1] - w[0]).collect();
    let mut set = icss_detect(&returns, critical)?;
    for idx in &mut set.indices {
        *idx += 1;
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn deviation_endpoints_are_exactly_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let series: Vec<f64> =
                (0..100).map(|_| rng.sample::<f64, _>(StandardNormal) * 3.0 + 1.0).collect();
            let scan = icss_scan(&series).unwrap();
            assert_eq!(scan.deviations[0], 0.0);
            assert_eq!(scan.deviations[100], 0.0);
        }
    }

    #[test]
    fn zero_variance_rejected() {
        assert!(matches!(icss_detect(&[4.0; 20], 1.358), Err(Error::Degenerate(_))));
    }

    #[test]
    fn short_series_rejected() {
        assert!(icss_detect(&[1.0, 2.0, 1.5], 1.358).is_err());
    }

    #[test]
    fn iid_series_rarely_flags_breaks() {
        let mut rng = ChaCha8Rng::seed_from_u64(100);
        let mut false_positives = 0;
        let trials = 200;
        for _ in 0..trials {
            let series: Vec<f64> =
                (0..1000).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            if !icss_detect(&series, ICSS_DEFAULT_CRITICAL).unwrap().indices.is_empty() {
                false_positives += 1;
            }
        }
        // 95% asymptotic critical value; allow finite-sample slack.
        assert!(false_positives <= trials * 7 / 100, "{false_positives}/{trials}");
    }

    #[test]
    fn variance_step_located_near_midpoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(200);
        let mut hits = 0;
        let mut located = Vec::new();
        for _ in 0..100 {
            let series: Vec<f64> = (0..400)
                .map(|i| {
                    let sd = if i < 200 { 1.0 } else { 5.0 };
                    rng.sample::<f64, _>(StandardNormal) * sd
                })
                .collect();
            let set = icss_detect(&series, ICSS_DEFAULT_CRITICAL).unwrap();
            if let Some(best) = set.indices.iter().min_by_key(|i| i.abs_diff(200)) {
                located.push(*best);
                if best.abs_diff(200) <= 10 {
                    hits += 1;
                }
            }
        }
        assert!(hits >= 90, "only {hits}/100 within +-10");
        located.sort_unstable();
        let median = located[located.len() / 2];
        assert!(median.abs_diff(200) <= 10, "median located break {median}");
    }

    #[test]
    fn returns_mode_maps_indices_to_levels() {
        // Random walk whose increments quadruple in scale halfway through.
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut level = 0.0;
        let series: Vec<f64> = (0..400)
            .map(|i| {
                let sd = if i < 200 { 0.5 } else { 6.0 };
                level += rng.sample::<f64, _>(StandardNormal) * sd;
                level
            })
            .collect();
        let set = icss_detect_returns(&series, ICSS_DEFAULT_CRITICAL).unwrap();
        assert!(!set.indices.is_empty());
        let best = set.indices.iter().min_by_key(|i| i.abs_diff(200)).unwrap();
        assert!(best.abs_diff(200) <= 10, "located {best}");
    }

    #[test]
    fn statistics_align_with_indices() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let series: Vec<f64> = (0..300)
            .map(|i| {
                let sd = if i < 150 { 1.0 } else { 4.0 };
                rng.sample::<f64, _>(StandardNormal) * sd
            })
            .collect();
        let set = icss_detect(&series, ICSS_DEFAULT_CRITICAL).unwrap();
        let stats = set.statistics.as_ref().unwrap();
        assert_eq!(stats.len(), set.indices.len());
        assert!(stats.iter().all(|s| *s > ICSS_DEFAULT_CRITICAL));
    }
}
