use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::train::{EpochStats, TrainedModel, TrainingConfig};
use super::{Model, ModelKind};
use crate::error::{Error, Result};
use crate::ingest::{InputLayout, Scaler};

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

/// Self-describing JSON model container: architecture tag, named tensor
/// shapes, flat parameter values, scaler, seed, and training configuration.
/// Wall-clock timing deliberately stays out so identical runs serialize to
/// identical bytes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub architecture: ModelKind,
    pub input_dim: usize,
    pub window: usize,
    pub layout: InputLayout,
    pub param_shapes: Vec<(String, Vec<usize>)>,
    pub params: Vec<f64>,
    pub scaler: Option<Scaler>,
    pub seed: u64,
    pub training_config: TrainingConfig,
    pub history: Vec<EpochStats>,
}

impl Checkpoint {
    pub fn from_trained(trained: &TrainedModel) -> Checkpoint {
        let mut params = Vec::with_capacity(trained.model.param_count());
        for slice in trained.model.param_slices() {
            params.extend_from_slice(slice);
        }
        Checkpoint {
            format_version: CHECKPOINT_FORMAT_VERSION,
            architecture: trained.kind,
            input_dim: trained.model.input_dim(),
            window: trained.window,
            layout: trained.layout,
            param_shapes: trained.model.param_layout(),
            params,
            scaler: trained.scaler.clone(),
            seed: trained.seed,
            training_config: trained.config.clone(),
            history: trained.history.clone(),
        }
    }

    /// Rebuilds the model, validating shapes against the stored layout.
    pub fn into_trained(self) -> Result<TrainedModel> {
        if self.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format version {} (expected {CHECKPOINT_FORMAT_VERSION})",
                self.format_version
            )));
        }
        // Parameter values are overwritten below; the seed only shapes the
        // throwaway initialization.
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut model =
            Model::new(self.architecture, self.input_dim, &self.training_config, &mut rng);
        let expected = model.param_layout();
        if expected != self.param_shapes {
            return Err(Error::Checkpoint(
                "stored tensor shapes do not match the declared architecture".into(),
            ));
        }
        let total: usize = model.param_count();
        if total != self.params.len() {
            return Err(Error::Checkpoint(format!(
                "parameter count {} does not match layout total {total}",
                self.params.len()
            )));
        }
        let mut offset = 0;
        for slot in model.param_slices_mut() {
            slot.copy_from_slice(&self.params[offset..offset + slot.len()]);
            offset += slot.len();
        }
        Ok(TrainedModel {
            kind: self.architecture,
            model,
            scaler: self.scaler,
            history: self.history,
            wall_clock_seconds: 0.0,
            seed: self.seed,
            config: self.training_config,
            window: self.window,
            layout: self.layout,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let data = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&data)?)
    }
}
