use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::nn::AdamConfig;

/// Network topology and loss settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TimeGanConfig {
    pub hidden_dim: usize,
    pub num_layers: usize,
    pub latent_dim: usize,
    pub noise_dim: usize,
    pub loss: LossWeights,
    /// The discriminator is only updated while its loss exceeds this value.
    pub discriminator_threshold: f64,
    /// Also discriminate the generator's latents before the supervisor.
    pub three_stream: bool,
    pub adam: AdamConfig,
}

impl Default for TimeGanConfig {
    fn default() -> Self {
        TimeGanConfig {
            hidden_dim: 18,
            num_layers: 3,
            latent_dim: 18,
            noise_dim: 3,
            loss: LossWeights::default(),
            discriminator_threshold: 0.15,
            three_stream: false,
            adam: AdamConfig::default(),
        }
    }
}

impl TimeGanConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_dim < 1 || self.latent_dim < 1 || self.noise_dim < 1 {
            return Err(invalid("network widths must be positive"));
        }
        if self.num_layers < 2 {
            return Err(invalid(
                "num_layers must be at least 2 (the supervisor uses one fewer)",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    /// Weight of the adversarial term on pre-supervisor latents (three-stream only).
    pub gamma: f64,
    /// Weight of √(supervised MSE) in the generator loss.
    pub supervised: f64,
    /// Weight of the moment-matching term in the generator loss.
    pub moment: f64,
    /// Weight of √(reconstruction MSE) in the joint embedder loss.
    pub reconstruction: f64,
    /// Weight of the supervised MSE in the joint embedder loss.
    pub embedder_supervised: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            gamma: 1.0,
            supervised: 100.0,
            moment: 100.0,
            reconstruction: 10.0,
            embedder_supervised: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSchedule {
    pub epochs_embedding: usize,
    pub epochs_supervised: usize,
    pub epochs_joint: usize,
    pub batch_size: usize,
    pub snapshot_every: usize,
    pub snapshot_multiplier: usize,
    /// Generator and embedder updates per discriminator opportunity.
    pub generator_steps: usize,
    pub seed: u64,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        TrainSchedule {
            epochs_embedding: 1250,
            epochs_supervised: 1250,
            epochs_joint: 1250,
            batch_size: 128,
            snapshot_every: 10,
            snapshot_multiplier: 10,
            generator_steps: 2,
            seed: 0,
        }
    }
}

impl TrainSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 1
            || self.snapshot_every < 1
            || self.snapshot_multiplier < 1
            || self.generator_steps < 1
        {
            return Err(invalid(
                "batch_size, snapshot_every, snapshot_multiplier and generator_steps must be positive",
            ));
        }
        Ok(())
    }

    /// Joint-phase epochs (1-based) after which a snapshot is taken. With no
    /// joint training a single snapshot is taken at epoch 0.
    pub fn snapshot_epochs(&self) -> Vec<usize> {
        let mut epochs: Vec<usize> = (1..=self.epochs_joint)
            .filter(|e| e % self.snapshot_every == 0)
            .collect();
        if epochs.is_empty() {
            epochs.push(self.epochs_joint);
        }
        epochs
    }

    pub fn is_snapshot_epoch(&self, epoch: usize) -> bool {
        if self.epochs_joint < self.snapshot_every {
            epoch == self.epochs_joint
        } else {
            epoch > 0 && epoch.is_multiple_of(self.snapshot_every)
        }
    }
}
