use ndarray::{Array1, Array3};
use serde::{Deserialize, Serialize};

use crate::breaks::BreakpointSet;
use crate::error::{Error, Result};

/// Per-timestep regime assignment derived from breakpoints.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegimeLabels {
    labels: Vec<usize>,
    /// One-hot width: number of breaks + 1.
    width: usize,
}

impl RegimeLabels {
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Label each timestep with the number of breaks at or before it, yielding
/// regimes `0..=m` with a one-hot width of `m + 1`.
pub fn encode_regimes(breaks: &BreakpointSet, length: usize) -> Result<RegimeLabels> {
    breaks.validate(length)?;
    let width = breaks.indices.len() + 1;
    let mut labels = vec![0usize; length];
    for (regime, &idx) in breaks.indices.iter().enumerate() {
        for label in labels.iter_mut().skip(idx) {
            *label = regime + 1;
        }
    }
    Ok(RegimeLabels { labels, width })
}

/// Widths of the three input groups making up one step vector
/// `[denoised target | features | regime one-hot]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputLayout {
    pub features: usize,
    pub regimes: usize,
}

impl InputLayout {
    pub fn dim(&self) -> usize {
        1 + self.features + self.regimes
    }
}

/// Sliding-window samples: `inputs` is (N, T, d); `targets[i]` is the value
/// one step after window `i`; `index_map[i]` is that value's timestep.
#[derive(Debug, Clone)]
pub struct WindowedDataset {
    pub inputs: Array3<f64>,
    pub targets: Array1<f64>,
    pub index_map: Vec<usize>,
    pub layout: InputLayout,
    pub window: usize,
    pub stride: usize,
}

impl WindowedDataset {
    pub fn len(&self) -> usize {
        self.index_map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index_map.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.layout.dim()
    }

    /// Splits samples by target timestep: targets before `boundary` land in
    /// the first dataset. Sample windows only ever look backward, so the
    /// first part never touches rows at or past the boundary.
    pub fn split_at_boundary(&self, boundary: usize) -> (WindowedDataset, WindowedDataset) {
        let cut = self.index_map.partition_point(|&t| t < boundary);
        (self.subset(0..cut), self.subset(cut..self.len()))
    }

    pub fn subset(&self, range: std::ops::Range<usize>) -> WindowedDataset {
        WindowedDataset {
            inputs: self.inputs.slice(ndarray::s![range.clone(), .., ..]).to_owned(),
            targets: self.targets.slice(ndarray::s![range.clone()]).to_owned(),
            index_map: self.index_map[range].to_vec(),
            layout: self.layout,
            window: self.window,
            stride: self.stride,
        }
    }
}

/// Assemble windowed samples from aligned series.
///
/// Step vectors are `[denoised[t], features..[t], one-hot(regime[t])]`.
/// Window `i` covers timesteps `[T + i*stride - T + 1 ..= T + i*stride]` and
/// its target is the next step's value, taken from `target_override` when
/// given (e.g. the raw series) and from `denoised` otherwise.
pub fn build_windows(
    denoised: &[f64],
    features: &[&[f64]],
    regimes: &RegimeLabels,
    window: usize,
    stride: usize,
    target_override: Option<&[f64]>,
) -> Result<WindowedDataset> {
    let n = denoised.len();
    if window == 0 || stride == 0 {
        return Err(Error::invalid("window and stride must be positive"));
    }
    if regimes.len() != n || features.iter().any(|f| f.len() != n) {
        return Err(Error::ShapeMismatch("all input series must share one length".into()));
    }
    if let Some(t) = target_override {
        if t.len() != n {
            return Err(Error::ShapeMismatch("target series length differs from inputs".into()));
        }
    }
    if n < window + 2 {
        return Err(Error::TooShort { need: window + 2, got: n });
    }
    let target_series = target_override.unwrap_or(denoised);
    let layout = InputLayout { features: features.len(), regimes: regimes.width() };
    let d = layout.dim();
    let n_samples = (n - 2 - window) / stride + 1;

    let mut inputs = Array3::zeros((n_samples, window, d));
    let mut targets = Array1::zeros(n_samples);
    let mut index_map = Vec::with_capacity(n_samples);
    for i in 0..n_samples {
        let end = window + i * stride; // inclusive last timestep of the window
        for w in 0..window {
            let t = end - window + 1 + w;
            inputs[[i, w, 0]] = denoised[t];
            for (f, col) in features.iter().enumerate() {
                inputs[[i, w, 1 + f]] = col[t];
            }
            inputs[[i, w, 1 + features.len() + regimes.labels()[t]]] = 1.0;
        }
        targets[i] = target_series[end + 1];
        index_map.push(end + 1);
    }
    Ok(WindowedDataset { inputs, targets, index_map, layout, window, stride })
}
