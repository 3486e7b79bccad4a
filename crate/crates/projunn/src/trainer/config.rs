//! Training configuration: a flat key-value (TOML) file mirroring the
//! fields below. Unknown keys are rejected.

use crate::error::{Error, Result};
use crate::lowrank::SamplerKind;
use crate::manifold::{InitScheme, UpdateMode};
use crate::numerics::Field;
use crate::rnn::TaskKind;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub task: TaskKind,
    /// Hidden dimension n of the unitary/orthogonal parameter.
    pub hidden_size: usize,
    /// Sequence length T (adding task) or delay T (copy task). Ignored by
    /// the random-unitary task.
    #[serde(default = "default_seq_len")]
    pub seq_len: usize,
    /// Copy length K.
    #[serde(default = "default_copy_len")]
    pub copy_len: usize,
    /// Data alphabet size n of the copy task (total symbols n + 2).
    #[serde(default = "default_n_sym")]
    pub n_sym: usize,
    pub batch: usize,
    pub epochs: usize,
    pub steps_per_epoch: usize,
    pub lr: f64,
    #[serde(default = "default_divisor")]
    pub unitary_lr_divisor: f64,
    #[serde(default = "default_decay")]
    pub lr_decay_per_epoch: f64,
    pub mode: UpdateMode,
    pub rank: usize,
    pub sampler: SamplerKind,
    pub init: InitScheme,
    pub seed: u64,
    pub field: Field,
    /// Random-unitary task: number of (x, U_tar x) pairs.
    #[serde(default = "default_dataset_size")]
    pub dataset_size: usize,
    /// Held-out samples for per-epoch test loss (adding/copy).
    #[serde(default = "default_eval_batch")]
    pub eval_batch: usize,
    /// Stop early once the tracked objective falls below this value:
    /// test loss for adding/copy, `||U - U_tar||_F^2` relative to its
    /// initial value for the random-unitary task.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_loss: Option<f64>,
    /// Reprojection cadence for the unitary parameter; omitted = every n
    /// steps, 0 = never.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reprojection_interval: Option<usize>,
}

fn default_seq_len() -> usize {
    100
}
fn default_copy_len() -> usize {
    10
}
fn default_n_sym() -> usize {
    8
}
fn default_divisor() -> f64 {
    32.0
}
fn default_decay() -> f64 {
    0.96
}
fn default_dataset_size() -> usize {
    4096
}
fn default_eval_batch() -> usize {
    1024
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) {
            return Err(Error::Config(format!("lr must be > 0, got {}", self.lr)));
        }
        if !(self.unitary_lr_divisor >= 1.0) {
            return Err(Error::Config(format!(
                "unitary_lr_divisor must be >= 1, got {}",
                self.unitary_lr_divisor
            )));
        }
        if !(self.lr_decay_per_epoch > 0.0 && self.lr_decay_per_epoch <= 1.0) {
            return Err(Error::Config(format!(
                "lr_decay_per_epoch must be in (0, 1], got {}",
                self.lr_decay_per_epoch
            )));
        }
        if self.rank == 0 {
            return Err(Error::Config("rank must be >= 1".into()));
        }
        if self.hidden_size == 0 || self.batch == 0 {
            return Err(Error::Config("hidden_size and batch must be positive".into()));
        }
        if self.epochs == 0 || self.steps_per_epoch == 0 {
            return Err(Error::Config("epochs and steps_per_epoch must be positive".into()));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: TrainConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("config parse: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Learning rate in effect during `epoch` (0-based):
    /// `lr * decay^epoch`, exactly.
    pub fn effective_lr(&self, epoch: usize) -> f64 {
        self.lr * self.lr_decay_per_epoch.powi(epoch as i32)
    }

    /// Unitary parameter reprojection interval (`None` = never).
    pub fn unitary_reprojection_interval(&self) -> Option<usize> {
        match self.reprojection_interval {
            None => Some(self.hidden_size),
            Some(0) => None,
            Some(k) => Some(k),
        }
    }
}
