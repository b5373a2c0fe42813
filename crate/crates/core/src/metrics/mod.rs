//! Classification and segmentation metrics and their reports.

mod roc;

use std::fmt::Write as _;

pub use roc::{roc_auc, RocCurve};

use crate::error::{invalid, Error, Result};
use crate::models::Predictor;
use crate::postproc::{binarize, BinaryMask, DEFAULT_THRESHOLD};
use crate::training::{argmax, prepare_input, LabeledDataset, Target};

/// Counts with rows indexed by true class and columns by predicted class.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        Self { classes, counts: vec![0; classes * classes] }
    }

    pub fn from_rows(rows: &[Vec<u64>]) -> Result<Self> {
        let k = rows.len();
        if rows.iter().any(|r| r.len() != k) {
            return Err(invalid("confusion matrix must be square"));
        }
        Ok(Self { classes: k, counts: rows.concat() })
    }

    pub fn from_predictions(classes: usize, truth: &[usize], predicted: &[usize]) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(invalid(format!("{} labels for {} predictions", truth.len(), predicted.len())));
        }
        let mut cm = Self::new(classes);
        for (&t, &p) in truth.iter().zip(predicted) {
            cm.record(t, p)?;
        }
        Ok(cm)
    }

    pub fn record(&mut self, truth: usize, predicted: usize) -> Result<()> {
        if truth >= self.classes || predicted >= self.classes {
            return Err(invalid(format!("class pair ({truth}, {predicted}) outside {} classes", self.classes)));
        }
        self.counts[truth * self.classes + predicted] += 1;
        Ok(())
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.classes + predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes).map(|i| self.get(i, i)).sum()
    }
}

pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    if cm.total() == 0 {
        return Err(invalid("accuracy of an empty confusion matrix"));
    }
    Ok(cm.trace() as f64 / cm.total() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrecisionRecall {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Some ratio had a zero denominator and was reported as 0.
    pub degenerate: bool,
}

fn ratio(num: u64, den: u64, degenerate: &mut bool) -> f64 {
    if den == 0 {
        *degenerate = true;
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn prf_from_counts(tp: u64, fp: u64, fn_: u64) -> PrecisionRecall {
    let mut degenerate = false;
    let precision = ratio(tp, tp + fp, &mut degenerate);
    let recall = ratio(tp, tp + fn_, &mut degenerate);
    let f1 = if precision + recall == 0.0 {
        degenerate = true;
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    PrecisionRecall { precision, recall, f1, degenerate }
}

/// One-vs-rest precision, recall and F1 for `positive`.
pub fn precision_recall_f1(cm: &ConfusionMatrix, positive: usize) -> Result<PrecisionRecall> {
    if positive >= cm.classes {
        return Err(invalid(format!("positive class {positive} outside {} classes", cm.classes)));
    }
    if cm.total() == 0 {
        return Err(invalid("precision of an empty confusion matrix"));
    }
    let tp = cm.get(positive, positive);
    let fp = (0..cm.classes).map(|t| cm.get(t, positive)).sum::<u64>() - tp;
    let fn_ = (0..cm.classes).map(|p| cm.get(positive, p)).sum::<u64>() - tp;
    Ok(prf_from_counts(tp, fp, fn_))
}

fn overlap(a: &BinaryMask, b: &BinaryMask) -> Result<(usize, usize, usize)> {
    let inter = a.intersect(b)?.count();
    Ok((inter, a.count(), b.count()))
}

/// `|a ∩ b| / |a ∪ b|`; two empty masks score 1.
pub fn iou(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    let (inter, na, nb) = overlap(a, b)?;
    let union = na + nb - inter;
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}

/// `2|a ∩ b| / (|a| + |b|)`; two empty masks score 1.
pub fn dice(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    let (inter, na, nb) = overlap(a, b)?;
    Ok(if na + nb == 0 { 1.0 } else { 2.0 * inter as f64 / (na + nb) as f64 })
}

/// Evaluation summary; absent metrics are omitted from the JSON record.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetricsReport {
    pub accuracy: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub iou: Option<f64>,
    pub dice: Option<f64>,
    pub auc: Option<f64>,
    /// Human-readable notes on degenerate cases (zero denominators, empty
    /// masks, single-class sets).
    pub flags: Vec<String>,
}

impl MetricsReport {
    pub fn entries(&self) -> Vec<(&'static str, f64)> {
        [
            ("accuracy", self.accuracy),
            ("precision", self.precision),
            ("recall", self.recall),
            ("f1", self.f1),
            ("iou", self.iou),
            ("dice", self.dice),
            ("auc", self.auc),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.map(|v| (k, v)))
        .collect()
    }

    /// JSON object with keys in a fixed order and four-decimal values.
    pub fn to_json(&self) -> String {
        let mut out = String::from("{\n");
        let entries = self.entries();
        for (i, (k, v)) in entries.iter().enumerate() {
            let sep = if i + 1 == entries.len() { "" } else { "," };
            writeln!(out, "  \"{k}\": {v:.4}{sep}").expect("string write");
        }
        out.push('}');
        out.push('\n');
        out
    }
}

/// Per-sample argmax predictions and positive-class scores.
pub fn classify(model: &dyn Predictor, ds: &LabeledDataset, positive: usize) -> Result<(Vec<usize>, Vec<f64>)> {
    let mut predicted = Vec::with_capacity(ds.len());
    let mut scores = Vec::with_capacity(ds.len());
    for s in ds.samples() {
        let probs = model.predict(&prepare_input(&s.image, model.input_shape())?)?;
        if positive >= probs.numel() {
            return Err(invalid(format!("positive class {positive} but the model scores {} classes", probs.numel())));
        }
        predicted.push(argmax(probs.data()));
        scores.push(probs.data()[positive]);
    }
    Ok((predicted, scores))
}

/// Accuracy, one-vs-rest precision/recall/F1 and ROC-AUC for `positive`.
pub fn evaluate_classifier(model: &dyn Predictor, ds: &LabeledDataset, positive: usize) -> Result<MetricsReport> {
    if ds.is_empty() || ds.is_segmentation() {
        return Err(Error::Dataset("classifier evaluation needs a non-empty labelled set".into()));
    }
    let (predicted, scores) = classify(model, ds, positive)?;
    classification_report(ds.num_classes(), &ds.labels(), &predicted, &scores, positive)
}

/// Report from per-sample truth, argmax predictions and positive-class
/// scores. Classes beyond `classes` seen in `predicted` widen the matrix.
pub fn classification_report(
    classes: usize,
    truth: &[usize],
    predicted: &[usize],
    scores: &[f64],
    positive: usize,
) -> Result<MetricsReport> {
    if truth.len() != predicted.len() || truth.len() != scores.len() {
        return Err(invalid("truth, predictions and scores differ in length"));
    }
    let k = classes.max(predicted.iter().max().map_or(0, |m| m + 1));
    let cm = ConfusionMatrix::from_predictions(k, truth, predicted)?;
    let prf = precision_recall_f1(&cm, positive)?;
    let mut report = MetricsReport {
        accuracy: Some(accuracy(&cm)?),
        precision: Some(prf.precision),
        recall: Some(prf.recall),
        f1: Some(prf.f1),
        ..Default::default()
    };
    if prf.degenerate {
        report.flags.push("precision/recall had a zero denominator".into());
    }
    let positives: Vec<bool> = truth.iter().map(|&t| t == positive).collect();
    match roc_auc(scores, &positives) {
        Ok(roc) => report.auc = Some(roc.auc),
        Err(_) => {
            report.flags.push("ROC undefined: only one class present".into());
        }
    }
    Ok(report)
}

/// Overlap scores of one predicted mask against its ground truth.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaskScores {
    pub correct_pixels: usize,
    pub total_pixels: usize,
    pub true_positive: usize,
    pub false_positive: usize,
    pub false_negative: usize,
    pub iou: f64,
    pub dice: f64,
}

pub fn mask_scores(predicted: &BinaryMask, truth: &BinaryMask) -> Result<MaskScores> {
    let (inter, np, nt) = overlap(predicted, truth)?;
    let total = predicted.width() * predicted.height();
    Ok(MaskScores {
        correct_pixels: total - (np - inter) - (nt - inter),
        total_pixels: total,
        true_positive: inter,
        false_positive: np - inter,
        false_negative: nt - inter,
        iou: iou(predicted, truth)?,
        dice: dice(predicted, truth)?,
    })
}

/// Binarised network masks at model resolution, one per sample.
pub fn segment(model: &dyn Predictor, ds: &LabeledDataset, threshold: f64) -> Result<Vec<BinaryMask>> {
    ds.samples()
        .iter()
        .map(|s| binarize(&model.predict(&prepare_input(&s.image, model.input_shape())?)?, threshold))
        .collect()
}

/// Combines per-sample scores: global pixel accuracy, pixelwise (micro) F1,
/// and IoU/Dice averaged over samples.
pub fn segmentation_report(scores: &[MaskScores]) -> Result<MetricsReport> {
    if scores.is_empty() {
        return Err(Error::Dataset("segmentation report needs at least one sample".into()));
    }
    let sum = |f: fn(&MaskScores) -> usize| scores.iter().map(f).sum::<usize>() as u64;
    let prf = prf_from_counts(sum(|s| s.true_positive), sum(|s| s.false_positive), sum(|s| s.false_negative));
    let n = scores.len() as f64;
    let mut report = MetricsReport {
        accuracy: Some(sum(|s| s.correct_pixels) as f64 / sum(|s| s.total_pixels) as f64),
        f1: Some(prf.f1),
        iou: Some(scores.iter().map(|s| s.iou).sum::<f64>() / n),
        dice: Some(scores.iter().map(|s| s.dice).sum::<f64>() / n),
        ..Default::default()
    };
    let empty = scores.iter().filter(|s| s.true_positive + s.false_positive + s.false_negative == 0).count();
    if empty > 0 {
        report.flags.push(format!("{empty} sample(s) with empty prediction and truth scored 1"));
    }
    if prf.degenerate {
        report.flags.push("pixelwise F1 had a zero denominator".into());
    }
    Ok(report)
}

/// Segmentation metrics of `model` on `ds`, comparing at model resolution.
pub fn evaluate_segmenter(model: &dyn Predictor, ds: &LabeledDataset) -> Result<MetricsReport> {
    if ds.is_empty() || !ds.is_segmentation() {
        return Err(Error::Dataset("segmenter evaluation needs a non-empty set with masks".into()));
    }
    let [_, h, w] = model.input_shape();
    let predicted = segment(model, ds, DEFAULT_THRESHOLD)?;
    let mut scores = Vec::with_capacity(ds.len());
    for (p, s) in predicted.iter().zip(ds.samples()) {
        let Target::Mask(m) = &s.target else { unreachable!("checked segmentation set") };
        let truth = crate::training::prepare_mask(m, w, h);
        scores.push(mask_scores(p, &binarize(&truth, 0.5)?)?);
    }
    segmentation_report(&scores)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accuracy_examples() {
        let cm = ConfusionMatrix::from_rows(&[vec![3, 1], vec![1, 3]]).unwrap();
        assert_eq!(accuracy(&cm).unwrap(), 0.75);
        let off = ConfusionMatrix::from_rows(&[vec![0, 2], vec![5, 0]]).unwrap();
        assert_eq!(accuracy(&off).unwrap(), 0.0);
        assert!(accuracy(&ConfusionMatrix::new(2)).is_err());
    }

    #[test]
    fn prf_examples() {
        // TP=2, FP=2, FN=0
        let cm = ConfusionMatrix::from_rows(&[vec![5, 2], vec![0, 2]]).unwrap();
        let r = precision_recall_f1(&cm, 1).unwrap();
        assert_eq!((r.precision, r.recall), (0.5, 1.0));
        assert!((r.f1 - 2.0 / 3.0).abs() < 1e-15);
        assert!(!r.degenerate);
        let none = ConfusionMatrix::from_rows(&[vec![3, 2], vec![4, 0]]).unwrap();
        let r = precision_recall_f1(&none, 1).unwrap();
        assert_eq!((r.precision, r.recall, r.f1), (0.0, 0.0, 0.0));
        assert!(r.degenerate);
        assert!(precision_recall_f1(&cm, 2).is_err());
    }

    #[test]
    fn overlap_examples() {
        let a = BinaryMask::from_fn(4, 4, |x, y| x < 2 && y < 2);
        let b = BinaryMask::from_fn(4, 4, |x, y| x < 2 && (1..3).contains(&y));
        assert!((iou(&a, &b).unwrap() - 2.0 / 6.0).abs() < 1e-15);
        assert_eq!(dice(&a, &b).unwrap(), 0.5);
        assert_eq!(iou(&a, &a).unwrap(), 1.0);
        let e = BinaryMask::empty(4, 4);
        assert_eq!((iou(&e, &e).unwrap(), dice(&e, &e).unwrap()), (1.0, 1.0));
        assert_eq!(iou(&a, &a.complement()).unwrap(), 0.0);
        assert!(dice(&a, &BinaryMask::empty(2, 2)).is_err());
    }

    #[test]
    fn report_json_layout() {
        let r = MetricsReport {
            accuracy: Some(0.94523),
            f1: Some(0.9466),
            iou: Some(0.865),
            dice: Some(0.88456),
            ..Default::default()
        };
        assert_eq!(
            r.to_json(),
            "{\n  \"accuracy\": 0.9452,\n  \"f1\": 0.9466,\n  \"iou\": 0.8650,\n  \"dice\": 0.8846\n}\n"
        );
    }
}
