//! Localization metrics: IoU, the thresholded per-image hit used as
//! accuracy, greedy matching for precision/recall, and timing summaries.
//!
//! One IoU criterion drives everything by default: an image counts as a hit
//! and a prediction counts as a true positive only when IoU is strictly
//! greater than [`DEFAULT_IOU_THRESHOLD`]. Exactly 0.7 is a miss.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annot::BoundingBox;

pub const DEFAULT_IOU_THRESHOLD: f64 = 0.7;

#[derive(Debug, Error, PartialEq)]
pub enum DetError {
    #[error("no images to evaluate")]
    EmptyDataset,
    #[error("no timing samples")]
    EmptyTiming,
    #[error("timing sample {index} is negative or not finite: {value}")]
    BadTiming { index: usize, value: f64 },
    #[error("confidence {0} outside [0, 1]")]
    Confidence(f64),
    #[error("IoU threshold {0} outside (0, 1)")]
    Threshold(f64),
    #[error("line {line}: {reason}")]
    PredictionLine { line: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub bbox: BoundingBox,
    pub confidence: f64,
}

impl Detection {
    pub fn new(bbox: BoundingBox, confidence: f64) -> Result<Self, DetError> {
        if !(0.0..=1.0).contains(&confidence) {
            return Err(DetError::Confidence(confidence));
        }
        Ok(Self { bbox, confidence })
    }
}

/// Predictions and ground truth for one image.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ImageEval {
    pub preds: Vec<Detection>,
    pub gts: Vec<BoundingBox>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    /// IoU of each true-positive pair, in match order.
    pub matched_ious: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalOutcome {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub mean_iou: f64,
    pub n_images: usize,
}

impl EvalOutcome {
    /// Values as percentages in report column order: accuracy, precision,
    /// recall, F1, IoU.
    pub fn as_percentages(&self) -> [f64; 5] {
        [
            self.accuracy * 100.0,
            self.precision * 100.0,
            self.recall * 100.0,
            self.f1 * 100.0,
            self.mean_iou * 100.0,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingSummary {
    pub mean_ms: f64,
    pub n_samples: usize,
}

pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let inter = a.intersection_area(b);
    if inter <= 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// 1 iff `iou_value > 0.7`.
pub fn binary_hit(iou_value: f64) -> u8 {
    u8::from(iou_value > DEFAULT_IOU_THRESHOLD)
}

/// Greedy one-to-one matching. Predictions are visited by descending
/// confidence (ties keep input order); each takes its highest-IoU unmatched
/// ground truth (ties go to the lower index) and is a true positive iff that
/// IoU exceeds `iou_threshold`.
pub fn match_detections(preds: &[Detection], gts: &[BoundingBox], iou_threshold: f64) -> MatchResult {
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&i, &j| {
        preds[j]
            .confidence
            .partial_cmp(&preds[i].confidence)
            .unwrap_or(Ordering::Equal)
    });
    let mut taken = vec![false; gts.len()];
    let mut matched_ious = Vec::new();
    let mut tp = 0;
    for &pi in &order {
        let mut best: Option<(usize, f64)> = None;
        for (gi, gt) in gts.iter().enumerate() {
            if taken[gi] {
                continue;
            }
            let v = iou(&preds[pi].bbox, gt);
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((gi, v));
            }
        }
        if let Some((gi, v)) = best {
            if v > iou_threshold {
                taken[gi] = true;
                tp += 1;
                matched_ious.push(v);
            }
        }
    }
    MatchResult {
        tp,
        fp: preds.len() - tp,
        fn_: gts.len() - tp,
        matched_ious,
    }
}

/// Highest IoU between any prediction and any ground truth of an image.
fn best_pair_iou(image: &ImageEval) -> f64 {
    image
        .preds
        .iter()
        .flat_map(|p| image.gts.iter().map(move |g| iou(&p.bbox, g)))
        .fold(0.0, f64::max)
}

/// Aggregates per-image results.
///
/// Accuracy is the mean per-image hit on the best-pair IoU; an image with no
/// ground truth is a hit exactly when it also has no predictions.
/// Precision, recall and F1 come from summed TP/FP/FN. Mean IoU sums the
/// matched IoUs and divides by the total ground-truth count, so unmatched
/// ground truths contribute zero.
pub fn evaluate_dataset(per_image: &[ImageEval], iou_threshold: f64) -> Result<EvalOutcome, DetError> {
    if per_image.is_empty() {
        return Err(DetError::EmptyDataset);
    }
    if !(iou_threshold > 0.0 && iou_threshold < 1.0) {
        return Err(DetError::Threshold(iou_threshold));
    }
    let (mut tp, mut fp, mut fn_, mut hits, mut gt_total) = (0usize, 0usize, 0usize, 0usize, 0usize);
    let mut iou_sum = 0.0;
    for image in per_image {
        let m = match_detections(&image.preds, &image.gts, iou_threshold);
        tp += m.tp;
        fp += m.fp;
        fn_ += m.fn_;
        gt_total += image.gts.len();
        iou_sum += m.matched_ious.iter().sum::<f64>();
        let hit = if image.gts.is_empty() {
            image.preds.is_empty()
        } else {
            best_pair_iou(image) > iou_threshold
        };
        hits += usize::from(hit);
    }
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(EvalOutcome {
        accuracy: ratio(hits, per_image.len()),
        precision,
        recall,
        f1,
        mean_iou: if gt_total == 0 { 0.0 } else { iou_sum / gt_total as f64 },
        n_images: per_image.len(),
    })
}

pub fn timing_summary(samples_ms: &[f64]) -> Result<TimingSummary, DetError> {
    if samples_ms.is_empty() {
        return Err(DetError::EmptyTiming);
    }
    if let Some((index, &value)) = samples_ms
        .iter()
        .enumerate()
        .find(|(_, v)| !v.is_finite() || **v < 0.0)
    {
        return Err(DetError::BadTiming { index, value });
    }
    Ok(TimingSummary {
        mean_ms: samples_ms.iter().sum::<f64>() / samples_ms.len() as f64,
        n_samples: samples_ms.len(),
    })
}

/// Reads `image_id class confidence x_min y_min x_max y_max` lines into
/// per-image detections, keeping file order within an image. Blank lines
/// and `#` comments are skipped. Detections below `min_confidence` are
/// dropped.
pub fn parse_predictions(text: &str, min_confidence: f64) -> Result<BTreeMap<String, Vec<Detection>>, DetError> {
    let mut out: BTreeMap<String, Vec<Detection>> = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let err = |reason: String| DetError::PredictionLine { line: line_no, reason };
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() != 7 {
            return Err(err(format!("expected 7 fields, found {}", fields.len())));
        }
        let mut nums = [0.0f64; 5];
        for (slot, field) in nums.iter_mut().zip(&fields[2..]) {
            *slot = field
                .parse::<f64>()
                .map_err(|_| err(format!("{field:?} is not a number")))?;
        }
        let bbox = BoundingBox::new(nums[1], nums[2], nums[3], nums[4]).map_err(|e| err(e.to_string()))?;
        let det = Detection::new(bbox, nums[0]).map_err(|e| err(e.to_string()))?;
        let entry = out.entry(fields[0].to_string()).or_default();
        if det.confidence >= min_confidence {
            entry.push(det);
        }
    }
    Ok(out)
}
