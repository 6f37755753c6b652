//! Result tables in the layouts used for reporting.
//!
//! Detection and timing tables have one row per model. The OCR table is
//! transposed: one row per metric and one value column per model.
//! Detection figures are percentages printed to 2 decimals, OCR rates and
//! the validation loss use 4, the mean edit distance and timings
//! (milliseconds) use 2. Missing cells print as `-` in text and as empty
//! fields in CSV.

use serde::{Deserialize, Serialize};

use super::SimError;
use crate::detmetrics::{EvalOutcome, TimingSummary};
use crate::textmetrics::OcrScore;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    Detection,
    Ocr,
    Timing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableFormat {
    #[default]
    Text,
    Csv,
}

impl Layout {
    pub fn columns(self) -> &'static [&'static str] {
        match self {
            Layout::Detection => &["Accuracy(%)", "Precision(%)", "Recall(%)", "F1 Score(%)", "IoU(%)"],
            Layout::Ocr => &[
                "Validation Loss",
                "Character Error Rate (CER)",
                "Word Error Rate (WER)",
                "Levenshtein Distance",
            ],
            Layout::Timing => &["With Training Dataset", "With External Dataset"],
        }
    }

    /// Printed precision of column `column`.
    pub fn decimals(self, column: usize) -> usize {
        match self {
            Layout::Ocr if column < 3 => 4,
            Layout::Ocr | Layout::Detection | Layout::Timing => 2,
        }
    }

    fn key_header(self) -> &'static str {
        match self {
            Layout::Ocr => "Metric",
            Layout::Detection | Layout::Timing => "Model",
        }
    }
}

/// One model's figures, in the layout's column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub label: String,
    pub values: Vec<Option<f64>>,
}

impl MetricRow {
    pub fn new(label: impl Into<String>, values: impl IntoIterator<Item = f64>) -> Self {
        Self {
            label: label.into(),
            values: values.into_iter().map(Some).collect(),
        }
    }

    pub fn detection(label: impl Into<String>, outcome: &EvalOutcome) -> Self {
        Self::new(label, outcome.as_percentages())
    }

    pub fn ocr(label: impl Into<String>, score: &OcrScore, val_loss: Option<f64>) -> Self {
        Self {
            label: label.into(),
            values: vec![val_loss, Some(score.cer), Some(score.wer), Some(score.levenshtein)],
        }
    }

    pub fn timing(label: impl Into<String>, train: Option<&TimingSummary>, external: Option<&TimingSummary>) -> Self {
        Self {
            label: label.into(),
            values: vec![train.map(|t| t.mean_ms), external.map(|t| t.mean_ms)],
        }
    }
}

/// Header row and body cells after formatting and transposition.
fn grid(rows: &[MetricRow], layout: Layout, missing: &str) -> Result<Vec<Vec<String>>, SimError> {
    let cols = layout.columns();
    for (i, r) in rows.iter().enumerate() {
        if r.values.len() != cols.len() {
            return Err(SimError::ColumnMismatch {
                row: i + 1,
                expected: cols.len(),
                found: r.values.len(),
            });
        }
    }
    let cell = |v: Option<f64>, c: usize| {
        v.map_or_else(|| missing.to_string(), |x| format!("{:.*}", layout.decimals(c), x))
    };
    let mut out = Vec::new();
    match layout {
        Layout::Ocr => {
            let mut header = vec![layout.key_header().to_string()];
            header.extend(rows.iter().map(|r| r.label.clone()));
            out.push(header);
            if !rows.is_empty() {
                for (c, name) in cols.iter().enumerate() {
                    let mut line = vec![name.to_string()];
                    line.extend(rows.iter().map(|r| cell(r.values[c], c)));
                    out.push(line);
                }
            }
        }
        Layout::Detection | Layout::Timing => {
            let mut header = vec![layout.key_header().to_string()];
            header.extend(cols.iter().map(|c| c.to_string()));
            out.push(header);
            for r in rows {
                let mut line = vec![r.label.clone()];
                line.extend(r.values.iter().enumerate().map(|(c, v)| cell(*v, c)));
                out.push(line);
            }
        }
    }
    Ok(out)
}

/// Left-aligned first column, right-aligned values, a rule under the header.
pub(crate) fn align(grid: &[Vec<String>]) -> String {
    let ncols = grid.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..ncols)
        .map(|c| grid.iter().filter_map(|r| r.get(c)).map(|s| s.chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for (i, row) in grid.iter().enumerate() {
        let cells: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, s)| {
                if c == 0 {
                    format!("{s:<w$}", w = widths[c])
                } else {
                    format!("{s:>w$}", w = widths[c])
                }
            })
            .collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
        if i == 0 {
            let total = widths.iter().sum::<usize>() + 2 * ncols.saturating_sub(1);
            out.push_str(&"-".repeat(total));
            out.push('\n');
        }
    }
    out
}

pub(crate) fn to_csv(grid: &[Vec<String>]) -> String {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
    for row in grid {
        w.write_record(row).expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("csv of UTF-8 cells")
}

pub fn render_table(rows: &[MetricRow], layout: Layout, format: TableFormat) -> Result<String, SimError> {
    Ok(match format {
        TableFormat::Text => align(&grid(rows, layout, "-")?),
        TableFormat::Csv => to_csv(&grid(rows, layout, "")?),
    })
}

/// Reads back a CSV table written by [`render_table`].
pub fn parse_table_csv(text: &str, layout: Layout) -> Result<Vec<MetricRow>, SimError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut records = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| SimError::Table(e.to_string()))?;
        records.push(rec.iter().map(str::to_string).collect::<Vec<_>>());
    }
    let Some((header, body)) = records.split_first() else {
        return Err(SimError::Table("missing header row".into()));
    };
    let cols = layout.columns();
    let num = |s: &str| -> Result<Option<f64>, SimError> {
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse().map(Some).map_err(|_| SimError::Table(format!("`{s}` is not a number")))
        }
    };
    match layout {
        Layout::Ocr => {
            let labels = &header[1..];
            if !body.is_empty() && body.len() != cols.len() {
                return Err(SimError::Table(format!("expected {} metric rows, found {}", cols.len(), body.len())));
            }
            let mut rows: Vec<MetricRow> = labels
                .iter()
                .map(|l| MetricRow {
                    label: l.clone(),
                    values: Vec::new(),
                })
                .collect();
            for line in body {
                if line.len() != labels.len() + 1 {
                    return Err(SimError::Table("ragged OCR table".into()));
                }
                for (row, cell) in rows.iter_mut().zip(&line[1..]) {
                    row.values.push(num(cell)?);
                }
            }
            Ok(rows)
        }
        Layout::Detection | Layout::Timing => {
            if header.len() != cols.len() + 1 {
                return Err(SimError::Table(format!("expected {} columns, found {}", cols.len() + 1, header.len())));
            }
            body.iter()
                .map(|line| {
                    if line.len() != cols.len() + 1 {
                        return Err(SimError::Table("ragged table".into()));
                    }
                    Ok(MetricRow {
                        label: line[0].clone(),
                        values: line[1..].iter().map(|c| num(c)).collect::<Result<_, _>>()?,
                    })
                })
                .collect()
        }
    }
}
