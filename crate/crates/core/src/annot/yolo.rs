//! YOLO text labels: one `class cx cy w h` record per line, coordinates
//! normalized by the image size.

use std::fmt;

use super::{ingest_box, AnnotError, AnnotatedImage, BoundingBox, LabeledBox, Parsed};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YoloRecord {
    pub class_id: u32,
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl YoloRecord {
    /// Normalizes a pixel box; the extent is clipped to `[0, 1]` first.
    pub fn from_box(bbox: &BoundingBox, class_id: u32, width: u32, height: u32) -> Self {
        let (w, h) = (width as f64, height as f64);
        let x0 = (bbox.x_min / w).clamp(0.0, 1.0);
        let x1 = (bbox.x_max / w).clamp(0.0, 1.0);
        let y0 = (bbox.y_min / h).clamp(0.0, 1.0);
        let y1 = (bbox.y_max / h).clamp(0.0, 1.0);
        Self {
            class_id,
            cx: (x0 + x1) / 2.0,
            cy: (y0 + y1) / 2.0,
            w: x1 - x0,
            h: y1 - y0,
        }
    }

    /// Pixel-space corners before any clipping.
    pub fn corners(&self, width: u32, height: u32) -> [f64; 4] {
        let (w, h) = (width as f64, height as f64);
        [
            (self.cx - self.w / 2.0) * w,
            (self.cy - self.h / 2.0) * h,
            (self.cx + self.w / 2.0) * w,
            (self.cy + self.h / 2.0) * h,
        ]
    }
}

impl fmt::Display for YoloRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:.6} {:.6} {:.6} {:.6}",
            self.class_id, self.cx, self.cy, self.w, self.h
        )
    }
}

fn parse_record(line: &str, line_no: usize) -> Result<YoloRecord, AnnotError> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != 5 {
        return Err(AnnotError::FieldCount {
            line: line_no,
            found: fields.len(),
        });
    }
    let class_id = fields[0].parse::<u32>().map_err(|_| AnnotError::YoloValue {
        line: line_no,
        reason: format!("class id {:?} is not a non-negative integer", fields[0]),
    })?;
    let mut values = [0.0f64; 4];
    for (slot, (field, label)) in values
        .iter_mut()
        .zip(fields[1..].iter().zip(["cx", "cy", "w", "h"]))
    {
        let v = field.parse::<f64>().map_err(|_| AnnotError::YoloValue {
            line: line_no,
            reason: format!("{label} {field:?} is not a number"),
        })?;
        if !(0.0..=1.0).contains(&v) {
            return Err(AnnotError::YoloValue {
                line: line_no,
                reason: format!("{label} {v} outside [0, 1]"),
            });
        }
        *slot = v;
    }
    let [cx, cy, w, h] = values;
    if w == 0.0 || h == 0.0 {
        return Err(AnnotError::YoloValue {
            line: line_no,
            reason: "zero width or height".into(),
        });
    }
    Ok(YoloRecord {
        class_id,
        cx,
        cy,
        w,
        h,
    })
}

/// Parses YOLO label text for a `width`×`height` image. Blank lines are
/// skipped; boxes reaching past the frame are clipped with a warning.
pub fn parse_yolo(text: &str, width: u32, height: u32) -> Result<Parsed<AnnotatedImage>, AnnotError> {
    let mut image = AnnotatedImage::new(width, height, "")?;
    let mut warnings = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let line_no = i + 1;
        let rec = parse_record(line, line_no)?;
        let context = format!("line {line_no}");
        if let Some(bbox) = ingest_box(rec.corners(width, height), width, height, &context, &mut warnings)? {
            image.boxes.push(LabeledBox {
                bbox,
                class_id: rec.class_id,
            });
        }
    }
    Ok(Parsed {
        value: image,
        warnings,
    })
}

/// One line per box, six decimals, LF terminated.
pub fn emit_yolo(image: &AnnotatedImage) -> String {
    image
        .boxes
        .iter()
        .map(|lb| {
            let rec = YoloRecord::from_box(&lb.bbox, lb.class_id, image.width, image.height);
            format!("{rec}\n")
        })
        .collect()
}
