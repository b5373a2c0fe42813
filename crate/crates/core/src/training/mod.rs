//! Optimisation, schedules, data preparation, transfer learning and the
//! training loop.

mod adam;
mod config;
mod data;
mod presets;
mod trainer;
mod transfer;

pub use adam::{AdamState, BETA1, BETA2, EPSILON};
pub use config::{lr_schedule, LossKind, TrainConfig};
pub use data::{
    augment, augment_with, balance_classes, minmax_normalize, prepare_input, prepare_mask, split_dataset,
    AugmentParams, LabeledDataset, Sample, Target, Transform,
};
pub use presets::{Preset, DET_DESK_SIZE, PRESET_NAMES, SEG_DESK_SIZE};
pub use trainer::{history_from_jsonl, history_to_jsonl, train, EpochRecord, Trainer};
pub use transfer::transfer_init;

pub(crate) use trainer::argmax;
