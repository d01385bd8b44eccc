//! Evaluation metrics computed from explicit confusion counts.
//!
//! Zero-denominator rule: a ratio metric is 0 when its denominator is 0,
//! except that Dice, precision, and recall of two *empty* masks (no positives
//! predicted, none in truth) are 1 — correctly predicting "no lesion" should
//! not score 0. This affects per-case means and is applied uniformly here.
//!
//! Sensitivity is TP/(TP+FN) and specificity TN/(TN+FP), the standard
//! definitions. [`MetricConvention::LegacyCompat`] switches to the variant
//! formulas `TP/(TP+FP)` and `TN/(TN+FN)` for comparison against prior
//! reports that used them.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::volume::Mask3;

/// TP/TN/FP/FN quadruple feeding every metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    fn both_empty(&self) -> bool {
        self.tp == 0 && self.fp == 0 && self.fn_ == 0
    }
}

/// Which sensitivity/specificity formulas to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MetricConvention {
    /// sensitivity = TP/(TP+FN), specificity = TN/(TN+FP).
    #[default]
    Standard,
    /// sensitivity = TP/(TP+FP), specificity = TN/(TN+FN).
    LegacyCompat,
}

/// Elementwise tally of binary prediction against binary truth.
pub fn confusion(pred: &[u8], truth: &[u8]) -> Result<ConfusionCounts> {
    if pred.len() != truth.len() {
        return Err(Error::shape(format!(
            "confusion: prediction has {} elements, truth {}",
            pred.len(),
            truth.len()
        )));
    }
    let mut c = ConfusionCounts::default();
    for (&p, &t) in pred.iter().zip(truth) {
        match (p != 0, t != 0) {
            (true, true) => c.tp += 1,
            (false, false) => c.tn += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

/// [`confusion`] over two volume-shaped masks, dims checked.
pub fn confusion_masks(pred: &Mask3, truth: &Mask3) -> Result<ConfusionCounts> {
    if pred.dims() != truth.dims() {
        return Err(Error::shape(format!(
            "confusion: prediction dims {:?} != truth dims {:?}",
            pred.dims(),
            truth.dims()
        )));
    }
    confusion(pred.data(), truth.data())
}

fn ratio(num: u64, den: u64, both_empty_is_one: bool) -> f64 {
    if den > 0 {
        num as f64 / den as f64
    } else if both_empty_is_one {
        1.0
    } else {
        0.0
    }
}

/// The six slice-classification metrics, all in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassificationMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    pub sensitivity: f64,
    pub specificity: f64,
}

pub fn classification_metrics(c: &ConfusionCounts) -> ClassificationMetrics {
    classification_metrics_with(c, MetricConvention::Standard)
}

pub fn classification_metrics_with(
    c: &ConfusionCounts,
    convention: MetricConvention,
) -> ClassificationMetrics {
    let both_empty = c.both_empty();
    let precision = ratio(c.tp, c.tp + c.fp, both_empty);
    let recall = ratio(c.tp, c.tp + c.fn_, both_empty);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    let accuracy = ratio(c.tp + c.tn, c.total(), false);
    let (sensitivity, specificity) = match convention {
        MetricConvention::Standard => (
            ratio(c.tp, c.tp + c.fn_, both_empty),
            ratio(c.tn, c.tn + c.fp, false),
        ),
        MetricConvention::LegacyCompat => (
            ratio(c.tp, c.tp + c.fp, both_empty),
            ratio(c.tn, c.tn + c.fn_, false),
        ),
    };
    ClassificationMetrics { precision, recall, f1, accuracy, sensitivity, specificity }
}

/// Dice similarity coefficient `2TP / (FP + 2TP + FN)`; two empty masks
/// score 1.
pub fn dice(c: &ConfusionCounts) -> f64 {
    ratio(2 * c.tp, c.fp + 2 * c.tp + c.fn_, c.both_empty())
}

/// Per-case segmentation quality record.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseMetrics {
    pub case_id: String,
    pub counts: ConfusionCounts,
    pub dice: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Dice/precision/recall of one predicted 3D mask against its ground truth.
pub fn evaluate_volume(case_id: &str, pred: &Mask3, truth: &Mask3) -> Result<CaseMetrics> {
    let counts = confusion_masks(pred, truth)?;
    let m = classification_metrics(&counts);
    Ok(CaseMetrics {
        case_id: case_id.to_string(),
        counts,
        dice: dice(&counts),
        precision: m.precision,
        recall: m.recall,
    })
}

/// How the spread across cases is reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StdMode {
    /// Divide by N.
    #[default]
    Population,
    /// Divide by N - 1.
    Sample,
}

/// Mean and standard deviation of one metric across cases.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

pub fn summarize(values: &[f64]) -> MeanStd {
    summarize_with(values, StdMode::Population)
}

pub fn summarize_with(values: &[f64], mode: StdMode) -> MeanStd {
    if values.is_empty() {
        return MeanStd { mean: 0.0, std: 0.0 };
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    let denom = match mode {
        StdMode::Population => n,
        StdMode::Sample => (n - 1.0).max(1.0),
    };
    MeanStd { mean, std: (ss / denom).sqrt() }
}

/// Suite-level mean +/- std for dice, precision, and recall.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteSummary {
    pub cases: usize,
    pub dice: MeanStd,
    pub precision: MeanStd,
    pub recall: MeanStd,
}

pub fn summarize_cases(cases: &[CaseMetrics]) -> SuiteSummary {
    let pick = |f: fn(&CaseMetrics) -> f64| -> Vec<f64> { cases.iter().map(f).collect() };
    SuiteSummary {
        cases: cases.len(),
        dice: summarize(&pick(|c| c.dice)),
        precision: summarize(&pick(|c| c.precision)),
        recall: summarize(&pick(|c| c.recall)),
    }
}

/// Sum of per-voxel binary cross-entropy style probabilities is not wanted
/// here; pipelines binarize first. This helper binarizes a probability slice
/// against a threshold with the inclusive `>=` rule used everywhere.
pub fn binarize_slice<T: Scalar>(probs: &[T], threshold: T) -> Vec<u8> {
    probs.iter().map(|&p| u8::from(p >= threshold)).collect()
}
