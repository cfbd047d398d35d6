use serde::{Deserialize, Serialize};

use super::filters::{WaveletFamily, WaveletFilter};
use crate::error::{Error, Result};

/// Boundary handling for the convolution at the signal edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryMode {
    /// Half-point symmetric reflection (default; avoids edge spikes).
    Symmetric,
    /// Circular wrap; requires even length, yields an orthogonal transform.
    Periodic,
}

/// Multilevel decomposition: one approximation band plus `levels` detail bands.
///
/// `level_lengths[j]` is the input length at decomposition level `j + 1`,
/// which is exactly what the inverse needs to restore lengths.
#[derive(Debug, Clone)]
pub struct WaveletDecomposition {
    pub family: WaveletFamily,
    pub mode: BoundaryMode,
    pub approx: Vec<f64>,
    /// `details[0]` is the finest band (level 1).
    pub details: Vec<Vec<f64>>,
    pub level_lengths: Vec<usize>,
}

impl WaveletDecomposition {
    pub fn levels(&self) -> usize {
        self.details.len()
    }

    pub fn original_length(&self) -> usize {
        self.level_lengths.first().copied().unwrap_or(0)
    }
}

/// Number of coefficients produced per band for a given input length.
pub fn coeff_len(n: usize, filter_len: usize, mode: BoundaryMode) -> usize {
    match mode {
        BoundaryMode::Symmetric => (n + filter_len - 1) / 2,
        BoundaryMode::Periodic => n / 2,
    }
}

// Half-point symmetric reflection of a possibly out-of-range index.
fn reflect(mut idx: isize, n: usize) -> usize {
    let n = n as isize;
    loop {
        if idx < 0 {
            idx = -idx - 1;
        } else if idx >= n {
            idx = 2 * n - 1 - idx;
        } else {
            return idx as usize;
        }
    }
}

fn check_signal(signal: &[f64], filter: &WaveletFilter, mode: BoundaryMode) -> Result<()> {
    if signal.len() < filter.len() {
        return Err(Error::TooShort { need: filter.len(), got: signal.len() });
    }
    if mode == BoundaryMode::Periodic && signal.len() % 2 != 0 {
        return Err(Error::invalid(format!(
            "periodic boundary mode requires an even length, got {}",
            signal.len()
        )));
    }
    if let Some(i) = signal.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    Ok(())
}

/// Single-level analysis: convolve with the low/high-pass pair and
/// downsample by two.
pub fn dwt_single(
    signal: &[f64],
    filter: &WaveletFilter,
    mode: BoundaryMode,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_signal(signal, filter, mode)?;
    let n = signal.len();
    let l = filter.len();
    let n_out = coeff_len(n, l, mode);
    let mut approx = vec![0.0; n_out];
    let mut detail = vec![0.0; n_out];
    match mode {
        BoundaryMode::Symmetric => {
            // Coefficient i reads extended positions 2i+1 .. 2i+L, where the
            // extension pads L-1 reflected samples on each side.
            let pad = (l - 1) as isize;
            for i in 0..n_out {
                let base = (2 * i + 1) as isize - pad;
                let mut a = 0.0;
                let mut d = 0.0;
                for k in 0..l {
                    let x = signal[reflect(base + k as isize, n)];
                    a += filter.lowpass[k] * x;
                    d += filter.highpass[k] * x;
                }
                approx[i] = a;
                detail[i] = d;
            }
        }
        BoundaryMode::Periodic => {
            for i in 0..n_out {
                let mut a = 0.0;
                let mut d = 0.0;
                for k in 0..l {
                    let x = signal[(2 * i + k) % n];
                    a += filter.lowpass[k] * x;
                    d += filter.highpass[k] * x;
                }
                approx[i] = a;
                detail[i] = d;
            }
        }
    }
    Ok((approx, detail))
}

/// Single-level synthesis; exact inverse of [`dwt_single`] for the stated
/// `original_length`.
pub fn idwt_single(
    approx: &[f64],
    detail: &[f64],
    filter: &WaveletFilter,
    mode: BoundaryMode,
    original_length: usize,
) -> Result<Vec<f64>> {
    let l = filter.len();
    let expect = coeff_len(original_length, l, mode);
    if approx.len() != detail.len() || approx.len() != expect {
        return Err(Error::ShapeMismatch(format!(
            "expected {} coefficients per band for length {}, got approx {} / detail {}",
            expect,
            original_length,
            approx.len(),
            detail.len()
        )));
    }
    if original_length < l {
        return Err(Error::TooShort { need: l, got: original_length });
    }
    let n = original_length;
    let mut out = vec![0.0; n];
    match mode {
        BoundaryMode::Symmetric => {
            let pad = l - 1;
            for (j, slot) in out.iter_mut().enumerate() {
                // Adjoint of the analysis indexing: position p = j + pad in
                // extended coordinates receives filter tap k = p - 2i - 1,
                // so i ranges over ceil((p-l)/2) ..= floor((p-1)/2).
                let p = j + pad;
                let i_min = if p >= l { (p - l + 1) / 2 } else { 0 };
                let i_max = ((p - 1) / 2).min(approx.len() - 1);
                let mut acc = 0.0;
                for i in i_min..=i_max {
                    let k = p - 2 * i - 1;
                    acc += approx[i] * filter.lowpass[k] + detail[i] * filter.highpass[k];
                }
                *slot = acc;
            }
        }
        BoundaryMode::Periodic => {
            for i in 0..approx.len() {
                for k in 0..l {
                    let j = (2 * i + k) % n;
                    out[j] += approx[i] * filter.lowpass[k] + detail[i] * filter.highpass[k];
                }
            }
        }
    }
    Ok(out)
}

fn max_feasible_levels(mut n: usize, filter_len: usize, mode: BoundaryMode) -> usize {
    let mut levels = 0;
    while n >= filter_len && !(mode == BoundaryMode::Periodic && n % 2 != 0) {
        n = coeff_len(n, filter_len, mode);
        levels += 1;
    }
    levels
}

/// Multilevel decomposition: the approximation band is re-decomposed
/// recursively, details are kept per level.
pub fn wavedec(
    signal: &[f64],
    family: WaveletFamily,
    levels: usize,
    mode: BoundaryMode,
) -> Result<WaveletDecomposition> {
    if levels == 0 {
        return Err(Error::invalid("decomposition level must be at least 1"));
    }
    let filter = family.filter();
    let feasible = max_feasible_levels(signal.len(), filter.len(), mode);
    if levels > feasible {
        return Err(Error::invalid(format!(
            "level {} too deep for length {} with {} ({} tap filter): max feasible level is {}",
            levels,
            signal.len(),
            family.name(),
            filter.len(),
            feasible
        )));
    }
    let mut level_lengths = Vec::with_capacity(levels);
    let mut details = Vec::with_capacity(levels);
    let mut current = signal.to_vec();
    for _ in 0..levels {
        level_lengths.push(current.len());
        let (approx, detail) = dwt_single(&current, &filter, mode)?;
        details.push(detail);
        current = approx;
    }
    Ok(WaveletDecomposition { family, mode, approx: current, details, level_lengths })
}

/// Inverse of [`wavedec`].
pub fn waverec(decomp: &WaveletDecomposition) -> Result<Vec<f64>> {
    let filter = decomp.family.filter();
    if decomp.details.len() != decomp.level_lengths.len() {
        return Err(Error::ShapeMismatch("detail bands do not match level metadata".into()));
    }
    let mut current = decomp.approx.clone();
    for level in (0..decomp.details.len()).rev() {
        current = idwt_single(
            &current,
            &decomp.details[level],
            &filter,
            decomp.mode,
            decomp.level_lengths[level],
        )?;
    }
    Ok(current)
}

/// Denoise by keeping only the approximation band: decompose, zero every
/// detail band, reconstruct. Output length equals input length.
pub fn denoise(
    signal: &[f64],
    family: WaveletFamily,
    levels: usize,
    mode: BoundaryMode,
) -> Result<Vec<f64>> {
    let mut decomp = wavedec(signal, family, levels, mode)?;
    for band in &mut decomp.details {
        band.iter_mut().for_each(|v| *v = 0.0);
    }
    waverec(&decomp)
}
