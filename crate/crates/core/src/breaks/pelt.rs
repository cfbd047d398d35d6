use serde::{Deserialize, Serialize};

use super::cost::{diff_variance_estimate, CostKind, SegmentCost};
use super::{BreakMethod, BreakpointSet};
use crate::error::{Error, Result};

/// Penalty applied per additional segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Penalty {
    /// Explicit nonnegative value.
    Value(f64),
    /// BIC-flavored default resolved per series: `2 * sigma^2 * ln(n)` for
    /// the normal-mean cost (sigma^2 estimated from first differences) and
    /// `2 * ln(n)` for the likelihood-scaled meanvar cost.
    Bic,
}

impl Default for Penalty {
    fn default() -> Self {
        Penalty::Bic
    }
}

impl Penalty {
    pub fn resolve(&self, series: &[f64], kind: CostKind) -> Result<f64> {
        let beta = match self {
            Penalty::Value(v) => *v,
            Penalty::Bic => {
                let n = series.len() as f64;
                match kind {
                    CostKind::NormalMean => 2.0 * diff_variance_estimate(series) * n.ln(),
                    CostKind::NormalMeanVar => 2.0 * n.ln(),
                }
            }
        };
        if !(beta >= 0.0) {
            return Err(Error::invalid(format!("penalty must be nonnegative, got {beta}")));
        }
        Ok(beta)
    }
}

/// Configuration shared by [`pelt_detect`] and
/// [`optimal_partition_bruteforce`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PeltConfig {
    #[serde(default)]
    pub penalty: Penalty,
    pub min_segment: usize,
    pub cost: CostKind,
}

impl Default for PeltConfig {
    fn default() -> Self {
        PeltConfig::for_cost(CostKind::NormalMean)
    }
}

impl PeltConfig {
    pub fn for_cost(cost: CostKind) -> Self {
        PeltConfig { penalty: Penalty::Bic, min_segment: cost.default_min_segment(), cost }
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.min_segment < self.cost.min_segment_floor() {
            return Err(Error::invalid(format!(
                "min_segment {} below the floor {} for this cost",
                self.min_segment,
                self.cost.min_segment_floor()
            )));
        }
        if n < 2 * self.min_segment {
            return Err(Error::TooShort { need: 2 * self.min_segment, got: n });
        }
        Ok(())
    }
}

struct Candidate {
    start: usize,
    /// First time index at which this candidate may be dropped. Pruning
    /// verdicts are delayed by `min_segment` steps: a candidate dominated at
    /// time `t` can still be optimal at times in `(t, t + min_segment)`
    /// because the dominating candidate `t` is not admissible there yet.
    remove_at: usize,
}

fn backtrack(prev: &[usize], n: usize) -> Vec<usize> {
    let mut breaks = Vec::new();
    let mut t = n;
    while t > 0 {
        let s = prev[t];
        if s > 0 {
            breaks.push(s);
        }
        t = s;
    }
    breaks.reverse();
    breaks
}

/// Exact penalized segmentation via pruned dynamic programming.
///
/// Returns the break positions minimizing `sum of segment costs + beta * m`;
/// each position is the index where a new segment begins. Ties are broken
/// toward fewer, later-starting segments, identically to the brute-force
/// oracle.
pub fn pelt_detect(series: &[f64], config: &PeltConfig) -> Result<BreakpointSet> {
    config.validate(series.len())?;
    let cost = SegmentCost::new(config.cost, series)?;
    let beta = config.penalty.resolve(series, config.cost)?;
    let n = series.len();
    let min_seg = config.min_segment;

    let mut f = vec![f64::INFINITY; n + 1];
    let mut prev = vec![0usize; n + 1];
    f[0] = -beta;
    let mut cands: Vec<Candidate> = vec![Candidate { start: 0, remove_at: usize::MAX }];

    for t in min_seg..=n {
        cands.retain(|c| c.remove_at > t);
        let mut best = f64::INFINITY;
        let mut best_s = 0;
        for c in &cands {
            let s = c.start;
            if t - s < min_seg {
                continue;
            }
            let v = f[s] + cost.cost(s, t) + beta;
            if v < best {
                best = v;
                best_s = s;
            }
        }
        f[t] = best;
        prev[t] = best_s;
        for c in &mut cands {
            if t - c.start >= min_seg && c.remove_at == usize::MAX {
                if f[c.start] + cost.cost(c.start, t) > f[t] {
                    c.remove_at = t + min_seg;
                }
            }
        }
        cands.push(Candidate { start: t, remove_at: usize::MAX });
    }

    Ok(BreakpointSet { indices: backtrack(&prev, n), method: BreakMethod::Pelt, statistics: None })
}

/// Series length guard for the quadratic oracle below.
pub const BRUTEFORCE_MAX_LEN: usize = 2000;

/// Unpruned O(n^2) dynamic program minimizing the same objective as
/// [`pelt_detect`]; serves as the exactness oracle in tests.
pub fn optimal_partition_bruteforce(series: &[f64], config: &PeltConfig) -> Result<BreakpointSet> {
    if series.len() > BRUTEFORCE_MAX_LEN {
        return Err(Error::invalid(format!(
            "series length {} exceeds the brute-force guard of {BRUTEFORCE_MAX_LEN}",
            series.len()
        )));
    }
    config.validate(series.len())?;
    let cost = SegmentCost::new(config.cost, series)?;
    let beta = config.penalty.resolve(series, config.cost)?;
    let n = series.len();
    let min_seg = config.min_segment;

    let mut f = vec![f64::INFINITY; n + 1];
    let mut prev = vec![0usize; n + 1];
    f[0] = -beta;
    for t in min_seg..=n {
        let mut best = f64::INFINITY;
        let mut best_s = 0;
        for s in std::iter::once(0).chain(min_seg..=t.saturating_sub(min_seg)) {
            if t - s < min_seg || !f[s].is_finite() {
                continue;
            }
            let v = f[s] + cost.cost(s, t) + beta;
            if v < best {
                best = v;
                best_s = s;
            }
        }
        f[t] = best;
        prev[t] = best_s;
    }

    Ok(BreakpointSet { indices: backtrack(&prev, n), method: BreakMethod::Pelt, statistics: None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn mean_config(beta: f64, min_segment: usize) -> PeltConfig {
        PeltConfig { penalty: Penalty::Value(beta), min_segment, cost: CostKind::NormalMean }
    }

    #[test]
    fn constant_series_has_no_breaks() {
        let series = vec![2.5; 50];
        let got = pelt_detect(&series, &mean_config(1.0, 2)).unwrap();
        assert!(got.indices.is_empty());
    }

    #[test]
    fn single_step_detected_at_boundary() {
        let mut series = vec![0.0; 50];
        series.extend(vec![10.0; 50]);
        let sigma2 = diff_variance_estimate(&series);
        let beta = 2.0 * sigma2.max(1e-6) * (series.len() as f64).ln();
        let cfg = mean_config(beta, 2);
        let got = pelt_detect(&series, &cfg).unwrap();
        assert_eq!(got.indices, vec![50]);
        let oracle = optimal_partition_bruteforce(&series, &cfg).unwrap();
        assert_eq!(got.indices, oracle.indices);
    }

    #[test]
    fn two_steps_detected() {
        let mut series = vec![0.0; 30];
        series.extend(vec![8.0; 30]);
        series.extend(vec![-4.0; 30]);
        let cfg = mean_config(1.0, 2);
        let got = pelt_detect(&series, &cfg).unwrap();
        assert_eq!(got.indices, vec![30, 60]);
        let oracle = optimal_partition_bruteforce(&series, &cfg).unwrap();
        assert_eq!(got.indices, oracle.indices);
    }

    #[test]
    fn huge_penalty_yields_empty_set() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let series: Vec<f64> = (0..80).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let got = pelt_detect(&series, &mean_config(1e12, 2)).unwrap();
        assert!(got.indices.is_empty());
    }

    #[test]
    fn zero_penalty_min_segment_one_splits_unequal_neighbors() {
        let series = [1.0, 1.0, 2.0, 2.0, 2.0, -1.0];
        let got = pelt_detect(&series, &mean_config(0.0, 1)).unwrap();
        assert_eq!(got.indices, vec![2, 5]);
        let oracle = optimal_partition_bruteforce(&series, &mean_config(0.0, 1)).unwrap();
        assert_eq!(got.indices, oracle.indices);
    }

    #[test]
    fn short_series_rejected() {
        assert!(pelt_detect(&[1.0, 2.0, 3.0], &mean_config(1.0, 2)).is_err());
    }

    #[test]
    fn non_finite_rejected() {
        let series = [1.0, f64::INFINITY, 2.0, 3.0];
        assert!(pelt_detect(&series, &mean_config(1.0, 2)).is_err());
    }

    #[test]
    fn bruteforce_guard() {
        let series = vec![0.0; BRUTEFORCE_MAX_LEN + 1];
        assert!(optimal_partition_bruteforce(&series, &mean_config(1.0, 2)).is_err());
    }

    fn random_series(rng: &mut ChaCha8Rng) -> Vec<f64> {
        let n = rng.random_range(20..=120);
        let n_steps = rng.random_range(0..4usize);
        let trend: f64 = rng.random_range(-0.05..0.05);
        let noise: f64 = rng.random_range(0.1..1.5);
        let mut level = 0.0;
        let mut steps: Vec<usize> = (0..n_steps).map(|_| rng.random_range(1..n)).collect();
        steps.sort_unstable();
        let mut out = Vec::with_capacity(n);
        let mut step_iter = steps.into_iter().peekable();
        for i in 0..n {
            if step_iter.peek() == Some(&i) {
                step_iter.next();
                level += rng.random_range(-6.0..6.0);
            }
            let e: f64 = rng.sample(StandardNormal);
            out.push(level + trend * i as f64 + noise * e);
        }
        out
    }

    #[test]
    fn pelt_matches_bruteforce_on_fuzzed_series() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for case in 0..120 {
            let series = random_series(&mut rng);
            for (cost, min_seg) in [(CostKind::NormalMean, 2), (CostKind::NormalMeanVar, 5)] {
                let cfg = PeltConfig { penalty: Penalty::Bic, min_segment: min_seg, cost };
                let a = pelt_detect(&series, &cfg).unwrap();
                let b = optimal_partition_bruteforce(&series, &cfg).unwrap();
                assert_eq!(a.indices, b.indices, "case {case} cost {cost:?}");
            }
        }
    }

    #[test]
    fn break_count_non_increasing_in_penalty() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let series = random_series(&mut rng);
            let mut last = usize::MAX;
            for beta in [0.1, 1.0, 5.0, 20.0, 100.0, 1000.0] {
                let got = pelt_detect(&series, &mean_config(beta, 2)).unwrap();
                assert!(got.indices.len() <= last);
                last = got.indices.len();
            }
        }
    }

    #[test]
    fn translation_invariance_of_normal_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..10 {
            let series = random_series(&mut rng);
            let shifted: Vec<f64> = series.iter().map(|v| v + 37.5).collect();
            let cfg = mean_config(4.0, 2);
            assert_eq!(
                pelt_detect(&series, &cfg).unwrap().indices,
                pelt_detect(&shifted, &cfg).unwrap().indices
            );
        }
    }

    #[test]
    fn scale_covariance_of_normal_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..10 {
            let series = random_series(&mut rng);
            let c = -3.0;
            let scaled: Vec<f64> = series.iter().map(|v| c * v).collect();
            let a = pelt_detect(&series, &mean_config(4.0, 2)).unwrap();
            let b = pelt_detect(&scaled, &mean_config(4.0 * c * c, 2)).unwrap();
            assert_eq!(a.indices, b.indices);
        }
    }
}
