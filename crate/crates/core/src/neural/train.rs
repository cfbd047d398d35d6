use ndarray::{Array1, Array3, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamConfig, AdamState};
use super::{Model, ModelKind};
use crate::error::{Error, Result};
use crate::ingest::{InputLayout, Scaler, WindowedDataset};

/// Unified training configuration shared by every architecture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    /// Chronological tail of the training windows held out for validation.
    pub validation_fraction: f64,
    pub seed: u64,
    /// Hidden units per recurrent layer.
    pub hidden: usize,
    /// Stacked recurrent layers.
    pub layers: usize,
    pub dropout: f64,
    pub tcn_channels: usize,
    pub tcn_blocks: usize,
    pub tcn_kernel: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 64,
            max_epochs: 50,
            patience: 10,
            validation_fraction: 0.10,
            seed: 42,
            hidden: 128,
            layers: 2,
            dropout: 0.2,
            tcn_channels: 64,
            tcn_blocks: 4,
            tcn_kernel: 3,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        let checks: [(bool, &str); 10] = [
            (self.learning_rate > 0.0, "learning rate must be positive"),
            ((0.0..1.0).contains(&self.beta1), "beta1 must lie in [0, 1)"),
            ((0.0..1.0).contains(&self.beta2), "beta2 must lie in [0, 1)"),
            (self.epsilon > 0.0, "epsilon must be positive"),
            (self.batch_size >= 1, "batch size must be at least 1"),
            (self.max_epochs >= 1, "max epochs must be at least 1"),
            (self.patience >= 1 && self.patience <= self.max_epochs, "patience must lie in [1, max_epochs]"),
            ((0.0..1.0).contains(&self.validation_fraction) && self.validation_fraction > 0.0, "validation fraction must lie in (0, 1)"),
            ((0.0..1.0).contains(&self.dropout), "dropout must lie in [0, 1)"),
            (
                self.hidden >= 1
                    && self.layers >= 1
                    && self.tcn_channels >= 1
                    && self.tcn_blocks >= 1
                    && self.tcn_kernel >= 1,
                "layer sizes must be at least 1",
            ),
        ];
        for (ok, msg) in checks {
            if !ok {
                return Err(Error::invalid(msg));
            }
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }
}

/// Per-epoch loss record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mse: f64,
}

/// A trained network plus everything needed to reproduce and apply it.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub kind: ModelKind,
    pub model: Model,
    pub scaler: Option<Scaler>,
    pub history: Vec<EpochStats>,
    pub wall_clock_seconds: f64,
    pub seed: u64,
    pub config: TrainingConfig,
    pub window: usize,
    pub layout: InputLayout,
}

impl TrainedModel {
    pub fn with_scaler(mut self, scaler: Scaler) -> Self {
        self.scaler = Some(scaler);
        self
    }

    /// Best recorded validation MSE (the returned parameters achieve it).
    pub fn best_val_mse(&self) -> f64 {
        self.history.iter().map(|e| e.val_mse).fold(f64::INFINITY, f64::min)
    }
}

/// Mean squared error of the model over a dataset, in scaled space.
fn evaluate_mse(model: &Model, inputs: &Array3<f64>, targets: &Array1<f64>, batch: usize) -> Result<f64> {
    let n = targets.len();
    let mut total = 0.0;
    let mut start = 0;
    while start < n {
        let end = (start + batch).min(n);
        let pred = model.forward(inputs.slice(ndarray::s![start..end, .., ..]))?;
        for (p, y) in pred.iter().zip(targets.slice(ndarray::s![start..end]).iter()) {
            total += (p - y) * (p - y);
        }
        start = end;
    }
    Ok(total / n as f64)
}

/// Train one architecture on windowed samples.
///
/// The chronological tail of the training windows forms the validation set;
/// within-train batch order is reshuffled every epoch from the seed; the
/// returned parameters are the best-validation snapshot.
pub fn train(
    kind: ModelKind,
    dataset: &WindowedDataset,
    config: &TrainingConfig,
) -> Result<TrainedModel> {
    config.validate()?;
    let started = std::time::Instant::now();
    let n = dataset.len();
    if n < 2 {
        return Err(Error::TooShort { need: 2, got: n });
    }
    let val_n = ((n as f64) * config.validation_fraction).floor() as usize;
    if val_n == 0 {
        return Err(Error::invalid(format!(
            "validation fraction {} leaves an empty validation set for {n} samples",
            config.validation_fraction
        )));
    }
    let train_n = n - val_n;
    if train_n == 0 {
        return Err(Error::invalid("no training samples left after the validation split"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = Model::new(kind, dataset.input_dim(), config, &mut rng);
    let mut adam = AdamState::new(&model.param_slices());
    let adam_cfg = config.adam();

    let val_inputs = dataset.inputs.slice(ndarray::s![train_n.., .., ..]).to_owned();
    let val_targets = dataset.targets.slice(ndarray::s![train_n..]).to_owned();

    let mut history: Vec<EpochStats> = Vec::new();
    let mut best_val = f64::INFINITY;
    let mut best_params: Option<Vec<Vec<f64>>> = None;
    let mut epochs_since_best = 0usize;
    let mut order: Vec<usize> = (0..train_n).collect();

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch_inputs = dataset.inputs.select(Axis(0), chunk);
            let batch_targets = dataset.targets.select(Axis(0), chunk);
            let (pred, cache) = model.forward_train(batch_inputs.view(), &mut rng)?;
            let b = chunk.len() as f64;
            let mut dpred = Array1::zeros(chunk.len());
            let mut loss = 0.0;
            for i in 0..chunk.len() {
                let e = pred[i] - batch_targets[i];
                loss += e * e;
                dpred[i] = 2.0 * e / b;
            }
            epoch_loss += loss;
            let grads = model.backward(&cache, &dpred);
            let grad_slices = grads.slices();
            let mut param_slices = model.param_slices_mut();
            adam_step(&mut param_slices, &grad_slices, &mut adam, &adam_cfg);
        }
        let train_mse = epoch_loss / train_n as f64;
        let val_mse = evaluate_mse(&model, &val_inputs, &val_targets, config.batch_size)?;
        history.push(EpochStats { epoch, train_mse, val_mse });

        if val_mse < best_val {
            best_val = val_mse;
            best_params = Some(model.param_slices().iter().map(|s| s.to_vec()).collect());
            epochs_since_best = 0;
        } else {
            epochs_since_best += 1;
            if epochs_since_best >= config.patience {
                break;
            }
        }
    }

    if let Some(best) = best_params {
        for (slot, saved) in model.param_slices_mut().into_iter().zip(&best) {
            slot.copy_from_slice(saved);
        }
    }

    Ok(TrainedModel {
        kind,
        model,
        scaler: None,
        history,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        seed: config.seed,
        config: config.clone(),
        window: dataset.window,
        layout: dataset.layout,
    })
}

/// One-step predictions aligned with their target timesteps, mapped back to
/// original units through the target scaler.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSeries {
    pub index_map: Vec<usize>,
    pub values: Vec<f64>,
}

pub fn predict(trained: &TrainedModel, dataset: &WindowedDataset) -> Result<PredictionSeries> {
    let scaler = trained.scaler.as_ref().ok_or(Error::UnfittedScaler)?;
    if dataset.input_dim() != trained.model.input_dim() {
        return Err(Error::ShapeMismatch(format!(
            "dataset input dimension {} does not match checkpoint dimension {}",
            dataset.input_dim(),
            trained.model.input_dim()
        )));
    }
    let n = dataset.len();
    let batch = trained.config.batch_size.max(1);
    let mut scaled = Vec::with_capacity(n);
    let mut start = 0;
    while start < n {
        let end = (start + batch).min(n);
        let pred = trained.model.forward(dataset.inputs.slice(ndarray::s![start..end, .., ..]))?;
        scaled.extend(pred.iter().copied());
        start = end;
    }
    let values = scaler.inverse_target(&scaled)?;
    Ok(PredictionSeries { index_map: dataset.index_map.clone(), values })
}
