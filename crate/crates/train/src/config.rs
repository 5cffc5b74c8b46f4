use serde::{Deserialize, Serialize};

use crate::error::{Result, TrainError};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    #[default]
    Spatial,
    Temporal,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Spatial => "spatial",
            Stage::Temporal => "temporal",
        }
    }
}

/// Optimizer, schedule and bookkeeping settings of one training stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub plateau_patience: usize,
    pub plateau_factor: f64,
    pub min_lr: f64,
    /// Relative improvement needed to reset the plateau counter.
    pub plateau_threshold: f64,
    pub seed: u64,
    pub stage: Stage,
    /// Add the agreement of overlapping spatial predictions to the
    /// constraint term.
    pub overlap_consistency: bool,
    /// Start every network from the zero map.
    pub zero_init_head: bool,
    /// Normalize each variable's inputs by their mean and standard deviation.
    pub normalize_inputs: bool,
    /// Epoch interval of the rolling `last` checkpoint; 0 disables it.
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 4e-4,
            epochs: 2000,
            batch_size: 8,
            plateau_patience: 40,
            plateau_factor: 0.5,
            min_lr: 1e-6,
            plateau_threshold: 1e-4,
            seed: 0,
            stage: Stage::Spatial,
            overlap_consistency: true,
            zero_init_head: false,
            normalize_inputs: false,
            checkpoint_every: 100,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(TrainError::Config(m));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if !(self.plateau_factor > 0.0 && self.plateau_factor < 1.0) {
            return bad(format!("plateau_factor must lie in (0, 1), got {}", self.plateau_factor));
        }
        if !(self.min_lr >= 0.0 && self.min_lr <= self.learning_rate) {
            return bad(format!("min_lr must lie in [0, learning_rate], got {}", self.min_lr));
        }
        if !(self.plateau_threshold >= 0.0 && self.plateau_threshold < 1.0) {
            return bad(format!("plateau_threshold must lie in [0, 1), got {}", self.plateau_threshold));
        }
        Ok(())
    }
}
