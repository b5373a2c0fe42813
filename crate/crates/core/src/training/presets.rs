use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use crate::error::{Error, Result};
use crate::models::{ModelConfig, WidthScale};

/// A named model + optimiser bundle, stored as TOML:
///
/// ```toml
/// name = "seg-desk"
/// train_fraction = 0.8
///
/// [model]
/// architecture = "nabla3"
/// input_shape = [1, 64, 64]
/// width_scale = { num = 1, den = 4 }
/// num_classes = 1
///
/// [train]
/// base_lr = 0.001
/// batch_size = 8
/// epochs = 40
/// lr_decay_every = 25
/// lr_decay_factor = 10.0
/// loss = "dice"
/// seed = 0
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Preset {
    pub name: String,
    /// Share of each class used for training when a set is split.
    #[serde(default = "default_fraction")]
    pub train_fraction: f64,
    pub model: ModelConfig,
    pub train: TrainConfig,
}

fn default_fraction() -> f64 {
    0.8
}

pub const PRESET_NAMES: [&str; 6] = ["xray-det", "ct-det", "seg", "xray-det-desk", "ct-det-desk", "seg-desk"];

/// Desk-scale NABLA-3 input side.
pub const SEG_DESK_SIZE: usize = 64;
/// Desk-scale IRRCNN input side.
pub const DET_DESK_SIZE: usize = 32;

impl Preset {
    pub fn named(name: &str) -> Result<Self> {
        let eighth = WidthScale { num: 1, den: 8 };
        let quarter = WidthScale { num: 1, den: 4 };
        let (model, train) = match name {
            "xray-det" => (ModelConfig::irrcnn([1, 128, 128], 2, WidthScale::FULL), TrainConfig::classification(75, 0)),
            "ct-det" => (
                ModelConfig::irrcnn([1, 192, 192], 2, WidthScale::FULL),
                TrainConfig { batch_size: 16, ..TrainConfig::classification(150, 0) },
            ),
            "seg" => (ModelConfig::nabla3([1, 192, 192], WidthScale::FULL), TrainConfig::segmentation(150, 0)),
            "xray-det-desk" => (
                ModelConfig::irrcnn([1, DET_DESK_SIZE, DET_DESK_SIZE], 2, eighth),
                TrainConfig { batch_size: 16, ..TrainConfig::classification(15, 0) },
            ),
            "ct-det-desk" => (
                ModelConfig::irrcnn([1, DET_DESK_SIZE, DET_DESK_SIZE], 2, eighth),
                TrainConfig { batch_size: 16, ..TrainConfig::classification(15, 0) },
            ),
            "seg-desk" => (
                ModelConfig::nabla3([1, SEG_DESK_SIZE, SEG_DESK_SIZE], quarter),
                TrainConfig { base_lr: 1e-3, ..TrainConfig::segmentation(40, 0) },
            ),
            other => {
                return Err(Error::Config(format!(
                    "unknown preset `{other}`; known presets: {}",
                    PRESET_NAMES.join(", ")
                )))
            }
        };
        Ok(Self { name: name.to_string(), train_fraction: default_fraction(), model, train })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("preset serialises")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let p: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        p.model.validate()?;
        p.train.validate()?;
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::training::{lr_schedule, LossKind};

    #[test]
    fn full_size_bundles() {
        let x = Preset::named("xray-det").unwrap();
        assert_eq!((x.train.base_lr, x.train.batch_size, x.train.epochs), (1e-3, 32, 75));
        assert_eq!((x.train.lr_decay_every, x.train.lr_decay_factor), (25, 10.0));
        let s = Preset::named("seg").unwrap();
        assert_eq!((s.train.base_lr, s.train.loss, s.train.batch_size), (3e-4, LossKind::Dice, 8));
        let c = Preset::named("ct-det").unwrap();
        assert_eq!((c.train.epochs, c.train.batch_size), (150, 16));
        assert_eq!(lr_schedule(&x.train, 50), 1e-5);
    }

    #[test]
    fn every_preset_round_trips() {
        for name in PRESET_NAMES {
            let p = Preset::named(name).unwrap();
            assert_eq!(Preset::from_toml(&p.to_toml()).unwrap(), p, "{name}");
        }
        assert!(Preset::named("nope").is_err());
    }
}
