use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::adam::AdamState;
use super::config::{lr_schedule, LossKind, TrainConfig};
use super::data::{augment, prepare_input, prepare_mask, LabeledDataset, Target};
use crate::error::{Error, Result};
use crate::models::{Architecture, ModelGraph, ParamStore};
use crate::tape::Tape;
use crate::tensor::{derive_seed, seeded_rng, Tensor};

/// One line of the training history.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    /// Mean training loss over the epoch's samples.
    pub loss: f64,
    /// Training accuracy for classifiers, mean hard Dice for segmenters,
    /// measured on the forward passes used for the updates.
    pub metric: f64,
}

/// Renders history as JSON lines, one record per epoch.
pub fn history_to_jsonl(history: &[EpochRecord]) -> String {
    history.iter().map(|r| serde_json::to_string(r).expect("plain record") + "\n").collect()
}

pub fn history_from_jsonl(text: &str) -> Result<Vec<EpochRecord>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| Error::Config(format!("history line: {e}"))))
        .collect()
}

/// Mini-batch Adam training with a seeded shuffle per epoch.
#[derive(Debug)]
pub struct Trainer {
    model: ModelGraph,
    config: TrainConfig,
    adam: AdamState,
    epoch: usize,
    tape: Tape,
}

impl Trainer {
    pub fn new(model: ModelGraph, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let expected = match model.config().architecture {
            Architecture::Irrcnn => LossKind::CrossEntropy,
            Architecture::Nabla3 => LossKind::Dice,
        };
        if config.loss != expected {
            return Err(Error::Config(format!(
                "{} is trained with {expected} loss, not {}",
                model.config().architecture,
                config.loss
            )));
        }
        Ok(Self { model, config, adam: AdamState::new(), epoch: 0, tape: Tape::new() })
    }

    pub fn model(&self) -> &ModelGraph {
        &self.model
    }

    pub fn into_model(self) -> ModelGraph {
        self.model
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    /// Epochs completed so far.
    pub fn epoch(&self) -> usize {
        self.epoch
    }

    fn check_dataset(&self, ds: &LabeledDataset) -> Result<()> {
        if ds.is_empty() {
            return Err(Error::Dataset("training set is empty".into()));
        }
        let cfg = self.model.config();
        match cfg.architecture {
            Architecture::Irrcnn if ds.is_segmentation() => {
                Err(Error::Config("a classifier needs a labelled classification set".into()))
            }
            Architecture::Irrcnn if ds.num_classes() > cfg.num_classes => Err(Error::Config(format!(
                "dataset has {} classes but the model outputs {}",
                ds.num_classes(),
                cfg.num_classes
            ))),
            Architecture::Nabla3 if !ds.is_segmentation() => {
                Err(Error::Config("a segmenter needs a set with masks".into()))
            }
            _ => Ok(()),
        }
    }

    /// Runs one epoch over `ds` and returns its record.
    pub fn run_epoch(&mut self, ds: &LabeledDataset) -> Result<EpochRecord> {
        self.check_dataset(ds)?;
        let epoch = self.epoch;
        let lr = lr_schedule(&self.config, epoch);
        let mut order: Vec<usize> = (0..ds.len()).collect();
        order.shuffle(&mut seeded_rng(derive_seed(self.config.seed, epoch as u64)));
        let aug_seed = derive_seed(self.config.seed, (1 << 32) + epoch as u64);

        let input_shape = self.model.config().input_shape;
        let (mut loss_sum, mut metric_sum) = (0.0, 0.0);
        for batch in order.chunks(self.config.batch_size) {
            let mut inputs = Vec::with_capacity(batch.len());
            let mut labels = Vec::new();
            let mut masks = Vec::new();
            for &i in batch {
                let sample = &ds.samples()[i];
                let (image, mask) = if self.config.augment {
                    let m = match &sample.target {
                        Target::Mask(m) => Some(m),
                        Target::Class(_) => None,
                    };
                    augment(&sample.image, m, derive_seed(aug_seed, i as u64))?
                } else {
                    (sample.image.clone(), None)
                };
                inputs.push(prepare_input(&image, input_shape)?);
                match &sample.target {
                    Target::Class(c) => labels.push(*c),
                    Target::Mask(m) => {
                        masks.push(prepare_mask(mask.as_ref().unwrap_or(m), input_shape[2], input_shape[1]))
                    }
                }
            }
            let x = Tensor::stack(&inputs)?;
            let tape = &mut self.tape;
            tape.reset();
            let xv = tape.constant(x);
            let out = self.model.forward_on(tape, &xv)?;
            let loss = match self.config.loss {
                LossKind::CrossEntropy => {
                    metric_sum += correct_predictions(tape.value(out), &labels) as f64;
                    tape.cross_entropy(out, &labels)?
                }
                LossKind::Dice => {
                    let target = Tensor::stack(&masks)?;
                    metric_sum += hard_dice_sum(tape.value(out), &target);
                    let t = tape.constant(target);
                    tape.dice_loss(out, t)?
                }
            };
            loss_sum += tape.value(loss).item() * batch.len() as f64;
            let grads = tape.backward(loss)?;
            self.adam.step(self.model.params_mut(), &grads, lr)?;
        }
        self.epoch += 1;
        let n = ds.len() as f64;
        Ok(EpochRecord { epoch, lr, loss: loss_sum / n, metric: metric_sum / n })
    }
}

/// Argmax hits in a `[B, K]` probability batch.
fn correct_predictions(probs: &Tensor, labels: &[usize]) -> usize {
    let k = probs.shape()[1];
    probs.data().chunks(k).zip(labels).filter(|(row, &y)| argmax(row) == y).count()
}

pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Sum over the batch of the Dice score of `pred > 0.5` against `target`.
fn hard_dice_sum(pred: &Tensor, target: &Tensor) -> f64 {
    let n = pred.shape()[0];
    let per = pred.numel() / n;
    let mut total = 0.0;
    for (p, t) in pred.data().chunks(per).zip(target.data().chunks(per)) {
        let (mut inter, mut a, mut b) = (0usize, 0usize, 0usize);
        for (&pv, &tv) in p.iter().zip(t) {
            let (x, y) = (pv > 0.5, tv > 0.5);
            inter += usize::from(x && y);
            a += usize::from(x);
            b += usize::from(y);
        }
        total += if a + b == 0 { 1.0 } else { 2.0 * inter as f64 / (a + b) as f64 };
    }
    total
}

/// Trains a copy of `model` for `config.epochs` epochs.
pub fn train(model: &ModelGraph, ds: &LabeledDataset, config: &TrainConfig) -> Result<(ParamStore, Vec<EpochRecord>)> {
    let mut trainer = Trainer::new(model.clone(), config.clone())?;
    let mut history = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        history.push(trainer.run_epoch(ds)?);
    }
    Ok((trainer.into_model().into_params(), history))
}
