//! Detection and OCR evaluation reports.

use std::collections::BTreeMap;

use plate_toolkit::annot::{parse_voc, BoundingBox, ClassTable};
use plate_toolkit::detmetrics::{evaluate_dataset, parse_predictions, ImageEval};
use plate_toolkit::simharness::{render_table, Layout, MetricRow};
use plate_toolkit::textmetrics::{self, parse_pairs_tsv, score_corpus, CharUnit, ScoreOptions};

use crate::args::{Aggregation, EvalDetArgs, EvalOcrArgs, Global, Unit};
use crate::error::{data, CliError};
use crate::files;

pub fn run_det(g: &Global, a: &EvalDetArgs) -> Result<(), CliError> {
    if !(0.0..=1.0).contains(&a.iou_threshold) {
        return Err(CliError::Usage(format!("--iou-threshold must lie in [0, 1], got {}", a.iou_threshold)));
    }
    if !(0.0..=1.0).contains(&a.min_confidence) {
        return Err(CliError::Usage(format!("--min-confidence must lie in [0, 1], got {}", a.min_confidence)));
    }
    let gts = load_ground_truth(a)?;
    let mut preds = parse_predictions(&files::read(&a.predictions)?, a.min_confidence)
        .map_err(|e| data(a.predictions.display(), e))?;

    let unknown: Vec<&str> = preds.keys().filter(|id| !gts.contains_key(*id)).map(String::as_str).collect();
    if !unknown.is_empty() {
        return Err(CliError::Data(format!(
            "predictions name images missing from the ground truth: {}",
            unknown.join(", ")
        )));
    }

    let per_image: Vec<ImageEval> = gts
        .into_iter()
        .map(|(id, gts)| ImageEval {
            preds: preds.remove(&id).unwrap_or_default(),
            gts,
        })
        .collect();
    let outcome = evaluate_dataset(&per_image, a.iou_threshold).map_err(|e| data("evaluation", e))?;
    let table = render_table(&[MetricRow::detection(&a.label, &outcome)], Layout::Detection, g.format.into())
        .map_err(|e| data("report", e))?;
    print!("{table}");
    Ok(())
}

/// Ground-truth boxes keyed by image id (XML path relative to the root,
/// without extension).
fn load_ground_truth(a: &EvalDetArgs) -> Result<BTreeMap<String, Vec<BoundingBox>>, CliError> {
    let found = files::collect(std::slice::from_ref(&a.ground_truth), |p| files::has_ext(p, &["xml"]))?;
    if found.is_empty() {
        return Err(CliError::Data(format!("{}: no VOC files found", a.ground_truth.display())));
    }
    let mut classes = ClassTable::new();
    let mut out = BTreeMap::new();
    for f in found {
        let parsed = parse_voc(&files::read(&f.path)?, &mut classes).map_err(|e| data(f.path.display(), e))?;
        out.insert(files::id_of(&f.rel), parsed.value.boxes.iter().map(|b| b.bbox).collect());
    }
    Ok(out)
}

pub fn run_ocr(g: &Global, a: &EvalOcrArgs) -> Result<(), CliError> {
    let rows = parse_pairs_tsv(&files::read(&a.pairs)?).map_err(|e| data(a.pairs.display(), e))?;
    let pairs: Vec<(textmetrics::Transcript, textmetrics::Transcript)> =
        rows.into_iter().map(|r| (r.prediction, r.ground_truth)).collect();
    let opts = ScoreOptions {
        unit: match a.unit {
            Unit::Scalar => CharUnit::ScalarValue,
            Unit::Grapheme => CharUnit::Grapheme,
        },
        aggregation: match a.aggregation {
            Aggregation::Micro => textmetrics::Aggregation::Micro,
            Aggregation::Macro => textmetrics::Aggregation::Macro,
        },
    };
    let score = score_corpus(&pairs, opts).map_err(|e| data(a.pairs.display(), e))?;
    let table = render_table(&[MetricRow::ocr(&a.label, &score, None)], Layout::Ocr, g.format.into())
        .map_err(|e| data("report", e))?;
    print!("{table}");
    Ok(())
}
