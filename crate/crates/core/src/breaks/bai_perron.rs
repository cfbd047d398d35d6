use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{BreakMethod, BreakpointSet};
use crate::error::{Error, Result};

/// Configuration for the regression-based multiple-break search.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BaiPerronConfig {
    /// Upper bound on the number of breaks considered.
    pub max_breaks: usize,
    /// Trimming fraction: every segment must span at least `ceil(trim * n)`
    /// observations.
    pub trim: f64,
    /// Significance level for the sup-F decision; snapped to the nearest
    /// tabulated level (0.10, 0.05, 0.01).
    pub significance: f64,
    /// Overrides the tabulated critical value when set (useful for
    /// configurations outside the shipped table).
    #[serde(default)]
    pub critical_override: Option<f64>,
}

impl Default for BaiPerronConfig {
    fn default() -> Self {
        BaiPerronConfig { max_breaks: 5, trim: 0.15, significance: 0.05, critical_override: None }
    }
}

// Asymptotic critical values for the sup-F tests with one regressor and 15%
// trimming, as tabulated in the standard multiple-structural-break
// literature. Row 0 is the 0-vs-1 test; row L is the L-vs-(L+1) test.
// Columns are significance levels 0.10 / 0.05 / 0.01.
const SIGNIFICANCE_LEVELS: [f64; 3] = [0.10, 0.05, 0.01];
const CRITICAL_TABLE: [[f64; 3]; 5] = [
    [7.04, 8.58, 12.29],
    [8.51, 10.13, 13.89],
    [9.41, 11.14, 14.80],
    [10.04, 11.83, 15.28],
    [10.58, 12.25, 15.76],
];

fn critical_value(test_level: usize, config: &BaiPerronConfig) -> f64 {
    if let Some(v) = config.critical_override {
        return v;
    }
    let col = SIGNIFICANCE_LEVELS
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| {
            let da = (config.significance - **a).abs();
            let db = (config.significance - **b).abs();
            da.partial_cmp(&db).unwrap()
        })
        .map(|(i, _)| i)
        .unwrap();
    let row = test_level.min(CRITICAL_TABLE.len() - 1);
    CRITICAL_TABLE[row][col]
}

// Near-zero RSS comparisons need a scale; exact fits otherwise divide 0/0.
fn supf_ratio(s0: f64, sk: f64, df: f64) -> f64 {
    let eps = 1e-12 * s0.max(1.0);
    if sk <= eps {
        if s0 - sk <= eps {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (s0 - sk) / (sk / df)
    }
}

/// Solve `a * x = b` for a small symmetric positive system via Gaussian
/// elimination with partial pivoting. `a` is row-major `p x p`.
fn solve_small(mut a: Vec<f64>, mut b: Vec<f64>, p: usize) -> Option<Vec<f64>> {
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    for col in 0..p {
        let mut pivot_row = col;
        for r in col + 1..p {
            if a[r * p + col].abs() > a[pivot_row * p + col].abs() {
                pivot_row = r;
            }
        }
        if a[pivot_row * p + col].abs() < 1e-12 * scale {
            return None;
        }
        if pivot_row != col {
            for c in 0..p {
                a.swap(col * p + c, pivot_row * p + c);
            }
            b.swap(col, pivot_row);
        }
        let pivot = a[col * p + col];
        for r in col + 1..p {
            let factor = a[r * p + col] / pivot;
            if factor != 0.0 {
                for c in col..p {
                    a[r * p + c] -= factor * a[col * p + c];
                }
                b[r] -= factor * b[col];
            }
        }
    }
    let mut x = vec![0.0; p];
    for col in (0..p).rev() {
        let mut acc = b[col];
        for c in col + 1..p {
            acc -= a[col * p + c] * x[c];
        }
        x[col] = acc / a[col * p + col];
    }
    Some(x)
}

/// Segment residual-sum-of-squares provider. The intercept-only model gets a
/// prefix-sum fast path; general regressors use running normal equations.
enum RssEngine<'a> {
    Intercept { prefix: Vec<f64>, prefix_sq: Vec<f64> },
    General { x: &'a Array2<f64>, y: &'a [f64], p: usize },
}

/// Running normal-equation accumulator for one growing segment.
struct RegAccum {
    p: usize,
    xtx: Vec<f64>,
    xty: Vec<f64>,
    yty: f64,
    rows: usize,
}

impl RegAccum {
    fn new(p: usize) -> Self {
        RegAccum { p, xtx: vec![0.0; p * p], xty: vec![0.0; p], yty: 0.0, rows: 0 }
    }

    fn add(&mut self, row: &[f64], y: f64) {
        for i in 0..self.p {
            for j in 0..self.p {
                self.xtx[i * self.p + j] += row[i] * row[j];
            }
            self.xty[i] += row[i] * y;
        }
        self.yty += y * y;
        self.rows += 1;
    }

    fn rss(&self, start: usize, end: usize) -> Result<f64> {
        let beta = solve_small(self.xtx.clone(), self.xty.clone(), self.p)
            .ok_or(Error::SingularSegment { start, end })?;
        let explained: f64 = beta.iter().zip(&self.xty).map(|(b, v)| b * v).sum();
        Ok((self.yty - explained).max(0.0))
    }
}

impl<'a> RssEngine<'a> {
    fn intercept(y: &[f64]) -> Self {
        let center = y.iter().sum::<f64>() / y.len() as f64;
        let mut prefix = Vec::with_capacity(y.len() + 1);
        let mut prefix_sq = Vec::with_capacity(y.len() + 1);
        prefix.push(0.0);
        prefix_sq.push(0.0);
        let (mut s, mut sq) = (0.0, 0.0);
        for v in y {
            let c = v - center;
            s += c;
            sq += c * c;
            prefix.push(s);
            prefix_sq.push(sq);
        }
        RssEngine::Intercept { prefix, prefix_sq }
    }

    fn p(&self) -> usize {
        match self {
            RssEngine::Intercept { .. } => 1,
            RssEngine::General { p, .. } => *p,
        }
    }

    /// RSS of `[start, end)`.
    fn rss(&self, start: usize, end: usize) -> Result<f64> {
        match self {
            RssEngine::Intercept { prefix, prefix_sq } => {
                let len = (end - start) as f64;
                let sum = prefix[end] - prefix[start];
                let sq = prefix_sq[end] - prefix_sq[start];
                Ok((sq - sum * sum / len).max(0.0))
            }
            RssEngine::General { x, y, p } => {
                let mut acc = RegAccum::new(*p);
                for t in start..end {
                    acc.add(x.row(t).as_slice().expect("row-major regressors"), y[t]);
                }
                acc.rss(start, end)
            }
        }
    }

    /// RSS of `[s, end)` for every `s` in `s_lo..=s_hi`, indexed by `s - s_lo`.
    fn rss_by_start(&self, end: usize, s_lo: usize, s_hi: usize) -> Result<Vec<f64>> {
        match self {
            RssEngine::Intercept { .. } => {
                (s_lo..=s_hi).map(|s| self.rss(s, end)).collect()
            }
            RssEngine::General { x, y, p } => {
                let mut out = vec![0.0; s_hi - s_lo + 1];
                let mut acc = RegAccum::new(*p);
                for s in (s_lo..end).rev() {
                    acc.add(x.row(s).as_slice().expect("row-major regressors"), y[s]);
                    if s <= s_hi {
                        out[s - s_lo] = acc.rss(s, end)?;
                    }
                }
                Ok(out)
            }
        }
    }

    /// RSS of `[start, k)` for every `k` in `k_lo..=k_hi`, indexed by `k - k_lo`.
    fn rss_by_end(&self, start: usize, k_lo: usize, k_hi: usize) -> Result<Vec<f64>> {
        match self {
            RssEngine::Intercept { .. } => {
                (k_lo..=k_hi).map(|k| self.rss(start, k)).collect()
            }
            RssEngine::General { x, y, p } => {
                let mut out = vec![0.0; k_hi - k_lo + 1];
                let mut acc = RegAccum::new(*p);
                for t in start..k_hi {
                    acc.add(x.row(t).as_slice().expect("row-major regressors"), y[t]);
                    let k = t + 1;
                    if k >= k_lo {
                        out[k - k_lo] = acc.rss(start, k)?;
                    }
                }
                Ok(out)
            }
        }
    }
}

struct SupfScan {
    statistic: f64,
}

/// Sup of the single-break F-type statistic over admissible positions inside
/// `[a, b)`, with trimming applied to the stretch length.
fn supf_scan(engine: &RssEngine, a: usize, b: usize, trim: f64) -> Result<Option<SupfScan>> {
    let len = b - a;
    let p = engine.p();
    let minlen = ((trim * len as f64).ceil() as usize).max(p + 1);
    if len < 2 * minlen {
        return Ok(None);
    }
    let s0 = engine.rss(a, b)?;
    let k_lo = a + minlen;
    let k_hi = b - minlen;
    let left = engine.rss_by_end(a, k_lo, k_hi)?;
    let right = engine.rss_by_start(b, k_lo, k_hi)?;
    let df = (len - 2 * p) as f64;
    let mut best = SupfScan { statistic: -1.0 };
    for k in k_lo..=k_hi {
        let sk = left[k - k_lo] + right[k - k_lo];
        let stat = supf_ratio(s0, sk, df);
        if stat > best.statistic {
            best = SupfScan { statistic: stat };
        }
    }
    Ok(Some(best))
}

fn supf_at(engine: &RssEngine, a: usize, b: usize, k: usize) -> Result<f64> {
    let p = engine.p();
    let s0 = engine.rss(a, b)?;
    let sk = engine.rss(a, k)? + engine.rss(k, b)?;
    let df = ((b - a).saturating_sub(2 * p)).max(1) as f64;
    Ok(supf_ratio(s0, sk, df))
}

/// Multiple structural breaks in a segmented regression, estimated by
/// residual-sum-of-squares dynamic programming and selected by sequential
/// sup-F tests (0 vs 1 break, then L vs L+1).
///
/// `regressors` is an `n x p` design matrix applied within every segment;
/// `None` fits a per-segment intercept (pure mean shifts).
pub fn bai_perron_detect(
    y: &[f64],
    regressors: Option<&Array2<f64>>,
    config: &BaiPerronConfig,
) -> Result<BreakpointSet> {
    let n = y.len();
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    if !(config.trim > 0.0 && config.trim < 0.5) {
        return Err(Error::invalid(format!("trim must lie in (0, 0.5), got {}", config.trim)));
    }
    if config.max_breaks == 0 {
        return Err(Error::invalid("max_breaks must be at least 1"));
    }
    let engine = match regressors {
        None => RssEngine::intercept(y),
        Some(x) => {
            if x.nrows() != n {
                return Err(Error::ShapeMismatch(format!(
                    "regressor rows {} != series length {n}",
                    x.nrows()
                )));
            }
            if !x.is_standard_layout() {
                return Err(Error::ShapeMismatch("regressors must be row-major".into()));
            }
            RssEngine::General { x, y, p: x.ncols() }
        }
    };
    let p = engine.p();
    let minlen = ((config.trim * n as f64).ceil() as usize).max(p + 1);
    if (config.trim * n as f64).ceil() < (p + 1) as f64 {
        return Err(Error::invalid(format!(
            "trim {} gives minimum segment {} below regressor count + 1 = {}",
            config.trim,
            (config.trim * n as f64).ceil(),
            p + 1
        )));
    }
    if n < 2 * minlen {
        return Err(Error::TooShort { need: 2 * minlen, got: n });
    }
    // Most breaks that still leave every segment admissible.
    let max_breaks = config.max_breaks.min(n / minlen - 1);

    // dp[k][j]: minimal RSS splitting [0, j) into k+1 segments.
    let mut dp = vec![vec![f64::INFINITY; n + 1]; max_breaks + 1];
    let mut arg = vec![vec![0usize; n + 1]; max_breaks + 1];
    let first_row = engine.rss_by_end(0, minlen, n)?;
    for j in minlen..=n {
        dp[0][j] = first_row[j - minlen];
    }
    for j in 2 * minlen..=n {
        let col = engine.rss_by_start(j, minlen, j - minlen)?;
        for k in 1..=max_breaks {
            if j < (k + 1) * minlen {
                continue;
            }
            let mut best = f64::INFINITY;
            let mut best_s = 0;
            for s in k * minlen..=j - minlen {
                let v = dp[k - 1][s] + col[s - minlen];
                if v < best {
                    best = v;
                    best_s = s;
                }
            }
            dp[k][j] = best;
            arg[k][j] = best_s;
        }
    }
    let partition = |m: usize| -> Vec<usize> {
        let mut breaks = Vec::with_capacity(m);
        let mut j = n;
        for k in (1..=m).rev() {
            let s = arg[k][j];
            breaks.push(s);
            j = s;
        }
        breaks.reverse();
        breaks
    };

    // Sequential scheme: global 0-vs-1 first, then test each segment of the
    // current optimum for one further break.
    let Some(first) = supf_scan(&engine, 0, n, config.trim)? else {
        return Ok(BreakpointSet {
            indices: vec![],
            method: BreakMethod::BaiPerron,
            statistics: Some(vec![]),
        });
    };
    if !(first.statistic > critical_value(0, config)) {
        return Ok(BreakpointSet {
            indices: vec![],
            method: BreakMethod::BaiPerron,
            statistics: Some(vec![]),
        });
    }
    let mut chosen = 1;
    while chosen < max_breaks {
        let current = partition(chosen);
        let mut bounds = vec![0];
        bounds.extend(&current);
        bounds.push(n);
        let mut max_stat = 0.0f64;
        for w in bounds.windows(2) {
            if let Some(scan) = supf_scan(&engine, w[0], w[1], config.trim)? {
                max_stat = max_stat.max(scan.statistic);
            }
        }
        if max_stat > critical_value(chosen, config) {
            chosen += 1;
        } else {
            break;
        }
    }

    let indices = partition(chosen);
    let mut statistics = Vec::with_capacity(indices.len());
    for (j, &brk) in indices.iter().enumerate() {
        let lo = if j == 0 { 0 } else { indices[j - 1] };
        let hi = if j + 1 == indices.len() { n } else { indices[j + 1] };
        statistics.push(supf_at(&engine, lo, hi, brk)?);
    }
    Ok(BreakpointSet { indices, method: BreakMethod::BaiPerron, statistics: Some(statistics) })
}
