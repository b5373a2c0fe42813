use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    CrossEntropy,
    Dice,
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossKind::CrossEntropy => "cross_entropy",
            LossKind::Dice => "dice",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub base_lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub lr_decay_every: usize,
    pub lr_decay_factor: f64,
    pub loss: LossKind,
    pub seed: u64,
    /// Apply a random flip/rotation/shift to every sample drawn.
    #[serde(default)]
    pub augment: bool,
}

impl TrainConfig {
    /// Adam at 1e-3, batch 32, cross-entropy, decaying 10× every 25 epochs.
    pub fn classification(epochs: usize, seed: u64) -> Self {
        Self {
            base_lr: 1e-3,
            batch_size: 32,
            epochs,
            lr_decay_every: 25,
            lr_decay_factor: 10.0,
            loss: LossKind::CrossEntropy,
            seed,
            augment: false,
        }
    }

    /// Adam at 3e-4, batch 8, Dice loss, decaying 10× every 25 epochs.
    pub fn segmentation(epochs: usize, seed: u64) -> Self {
        Self { base_lr: 3e-4, batch_size: 8, loss: LossKind::Dice, ..Self::classification(epochs, seed) }
    }

    /// Zero epochs is accepted and trains nothing.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.base_lr.is_finite() && self.base_lr > 0.0) {
            return bad(format!("base_lr {} must be positive", self.base_lr));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if self.lr_decay_every == 0 {
            return bad("lr_decay_every must be positive".into());
        }
        if !(self.lr_decay_factor.is_finite() && self.lr_decay_factor > 1.0) {
            return bad(format!("lr_decay_factor {} must exceed 1", self.lr_decay_factor));
        }
        Ok(())
    }
}

/// Step decay: `base_lr / factor^floor(epoch / every)`.
pub fn lr_schedule(config: &TrainConfig, epoch: usize) -> f64 {
    let k = (epoch / config.lr_decay_every) as i32;
    config.base_lr / config.lr_decay_factor.powi(k)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classification_schedule() {
        let cfg = TrainConfig::classification(75, 0);
        assert_eq!(lr_schedule(&cfg, 0), 1e-3);
        assert_eq!(lr_schedule(&cfg, 24), 1e-3);
        assert_eq!(lr_schedule(&cfg, 25), 1e-4);
        assert_eq!(lr_schedule(&cfg, 50), 1e-5);
    }

    #[test]
    fn validation() {
        let ok = TrainConfig::segmentation(3, 1);
        assert!(ok.validate().is_ok());
        assert!(TrainConfig { lr_decay_factor: 1.0, ..ok.clone() }.validate().is_err());
        assert!(TrainConfig { batch_size: 0, ..ok.clone() }.validate().is_err());
        assert!(TrainConfig { base_lr: -1.0, ..ok }.validate().is_err());
    }
}
