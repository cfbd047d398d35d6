//! Minimal dense deep-learning engine: LSTM, GRU, and TCN regressors with
//! analytic gradients, Adam optimization, early stopping, and fully seeded
//! determinism. All arithmetic is double precision and single threaded so a
//! fixed seed reproduces results bit for bit.

mod adam;
mod checkpoint;
mod gru;
mod lstm;
mod tcn;
mod train;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::Checkpoint;
pub use gru::{gru_cell_forward, GruLayer, GruModel, GruSpec};
pub use lstm::{lstm_cell_forward, LstmLayer, LstmModel, LstmSpec};
pub use tcn::{tcn_receptive_field, TcnBlock, TcnModel, TcnSpec};
pub use train::{predict, train, EpochStats, PredictionSeries, TrainedModel, TrainingConfig};

use ndarray::{Array1, Array2, ArrayView3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sequence regressor architectures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Lstm,
    Gru,
    Tcn,
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Lstm => "lstm",
            ModelKind::Gru => "gru",
            ModelKind::Tcn => "tcn",
        }
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

// Saturation rounds to the closed endpoints in floating point, so the gate
// range checks admit 0 and 1.
pub(crate) fn debug_assert_gate_range(label: &str, a: &Array2<f64>) {
    debug_assert!(
        a.iter().all(|v| v.is_finite() && (0.0..=1.0).contains(v)),
        "{label}: gate activation outside [0, 1]"
    );
}

pub(crate) fn debug_assert_tanh_range(label: &str, a: &Array2<f64>) {
    debug_assert!(
        a.iter().all(|v| v.is_finite() && (-1.0..=1.0).contains(v)),
        "{label}: tanh activation outside [-1, 1]"
    );
}

pub(crate) fn debug_assert_finite<'a>(label: &str, values: impl IntoIterator<Item = &'a f64>) {
    debug_assert!(
        values.into_iter().all(|v| v.is_finite()),
        "{label}: non-finite value produced"
    );
}

/// Inverted-dropout mask: entries are `0` or `1/keep`, so inference needs no
/// rescaling. Draw order is fixed, keeping training deterministic.
pub(crate) fn dropout_mask(
    rng: &mut ChaCha8Rng,
    shape: (usize, usize),
    rate: f64,
) -> Option<Array2<f64>> {
    if rate <= 0.0 {
        return None;
    }
    let keep = 1.0 - rate;
    let inv = 1.0 / keep;
    Some(Array2::from_shape_fn(shape, |_| if rng.random::<f64>() < keep { inv } else { 0.0 }))
}

/// Xavier-uniform draw in `+-sqrt(6 / (fan_in + fan_out))`.
pub(crate) fn xavier(rng: &mut ChaCha8Rng, rows: usize, cols: usize, fan_in: usize, fan_out: usize) -> Array2<f64> {
    let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-a..a))
}

/// Scaled-uniform draw in `+-sqrt(3 / h)` for recurrent matrices.
pub(crate) fn recurrent_uniform(rng: &mut ChaCha8Rng, h: usize) -> Array2<f64> {
    let a = (3.0 / h as f64).sqrt();
    Array2::from_shape_fn((h, h), |_| rng.random_range(-a..a))
}

pub(crate) fn xavier_vec(rng: &mut ChaCha8Rng, len: usize, fan_in: usize, fan_out: usize) -> Array1<f64> {
    let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Array1::from_shape_fn(len, |_| rng.random_range(-a..a))
}

/// One trained or trainable network.
#[derive(Debug, Clone)]
pub enum Model {
    Lstm(LstmModel),
    Gru(GruModel),
    Tcn(TcnModel),
}

/// Architecture-specific forward caches for backpropagation (opaque).
pub enum Cache {
    Lstm(lstm::LstmCache),
    Gru(gru::GruCache),
    Tcn(tcn::TcnCache),
}

/// Parameter gradients, mirroring the model's parameter layout.
pub enum Grads {
    Lstm(lstm::LstmParams),
    Gru(gru::GruParams),
    Tcn(tcn::TcnParams),
}

impl Grads {
    /// Gradient tensors in the order of [`Model::param_slices`].
    pub fn slices(&self) -> Vec<&[f64]> {
        match self {
            Grads::Lstm(p) => p.slices(),
            Grads::Gru(p) => p.slices(),
            Grads::Tcn(p) => p.slices(),
        }
    }
}

impl Model {
    /// Fresh seeded model for the given architecture and input width.
    pub fn new(
        kind: ModelKind,
        input_dim: usize,
        config: &TrainingConfig,
        rng: &mut ChaCha8Rng,
    ) -> Model {
        match kind {
            ModelKind::Lstm => Model::Lstm(LstmModel::new(
                LstmSpec {
                    input_dim,
                    hidden: config.hidden,
                    layers: config.layers,
                    dropout: config.dropout,
                },
                rng,
            )),
            ModelKind::Gru => Model::Gru(GruModel::new(
                GruSpec {
                    input_dim,
                    hidden: config.hidden,
                    layers: config.layers,
                    dropout: config.dropout,
                },
                rng,
            )),
            ModelKind::Tcn => Model::Tcn(TcnModel::new(
                TcnSpec {
                    input_dim,
                    channels: config.tcn_channels,
                    blocks: config.tcn_blocks,
                    kernel: config.tcn_kernel,
                    dropout: config.dropout,
                },
                rng,
            )),
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Lstm(_) => ModelKind::Lstm,
            Model::Gru(_) => ModelKind::Gru,
            Model::Tcn(_) => ModelKind::Tcn,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Model::Lstm(m) => m.spec.input_dim,
            Model::Gru(m) => m.spec.input_dim,
            Model::Tcn(m) => m.spec.input_dim,
        }
    }

    fn check_input(&self, inputs: &ArrayView3<f64>) -> Result<()> {
        if inputs.shape()[2] != self.input_dim() {
            return Err(Error::ShapeMismatch(format!(
                "input dimension {} does not match model dimension {}",
                inputs.shape()[2],
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Inference pass: recurrent models unroll from zero states, the TCN
    /// consumes the window whole; dropout is disabled.
    pub fn forward(&self, inputs: ArrayView3<f64>) -> Result<Array1<f64>> {
        self.check_input(&inputs)?;
        let (pred, _) = self.forward_internal(inputs, None);
        Ok(pred)
    }

    /// Training-mode forward pass (dropout active) returning the cache
    /// required by [`Model::backward`].
    pub fn forward_train(
        &self,
        inputs: ArrayView3<f64>,
        rng: &mut ChaCha8Rng,
    ) -> Result<(Array1<f64>, Cache)> {
        self.check_input(&inputs)?;
        Ok(self.forward_internal(inputs, Some(rng)))
    }

    fn forward_internal(
        &self,
        inputs: ArrayView3<f64>,
        rng: Option<&mut ChaCha8Rng>,
    ) -> (Array1<f64>, Cache) {
        match self {
            Model::Lstm(m) => {
                let (pred, cache) = m.forward(inputs, rng);
                (pred, Cache::Lstm(cache))
            }
            Model::Gru(m) => {
                let (pred, cache) = m.forward(inputs, rng);
                (pred, Cache::Gru(cache))
            }
            Model::Tcn(m) => {
                let (pred, cache) = m.forward(inputs, rng);
                (pred, Cache::Tcn(cache))
            }
        }
    }

    /// Exact gradients of every parameter for the loss whose per-sample
    /// prediction gradient is `dpred`.
    ///
    pub fn backward(&self, cache: &Cache, dpred: &Array1<f64>) -> Grads {
        match (self, cache) {
            (Model::Lstm(m), Cache::Lstm(c)) => Grads::Lstm(m.backward(c, dpred)),
            (Model::Gru(m), Cache::Gru(c)) => Grads::Gru(m.backward(c, dpred)),
            (Model::Tcn(m), Cache::Tcn(c)) => Grads::Tcn(m.backward(c, dpred)),
            _ => unreachable!("cache architecture mismatch"),
        }
    }

    pub fn param_slices(&self) -> Vec<&[f64]> {
        match self {
            Model::Lstm(m) => m.params.slices(),
            Model::Gru(m) => m.params.slices(),
            Model::Tcn(m) => m.params.slices(),
        }
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        match self {
            Model::Lstm(m) => m.params.slices_mut(),
            Model::Gru(m) => m.params.slices_mut(),
            Model::Tcn(m) => m.params.slices_mut(),
        }
    }

    /// Named tensor shapes in the exact order of [`Model::param_slices`].
    pub fn param_layout(&self) -> Vec<(String, Vec<usize>)> {
        match self {
            Model::Lstm(m) => m.params.layout(),
            Model::Gru(m) => m.params.layout(),
            Model::Tcn(m) => m.params.layout(),
        }
    }

    pub fn param_count(&self) -> usize {
        self.param_slices().iter().map(|s| s.len()).sum()
    }
}
