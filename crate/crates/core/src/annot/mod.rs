//! Detection annotations: Pascal VOC XML, YOLO-normalized text and binary
//! pixel masks, all converging on one pixel-space representation.
//!
//! Out-of-bounds boxes are clipped on ingest and boxes left with no area are
//! dropped; both events are reported as [`AnnotWarning`]s next to the parsed
//! value. Inverted or degenerate source boxes are errors, never clamped.

mod bbox;
mod mask;
mod voc;
mod yolo;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bbox::BoundingBox;
pub use mask::{rasterize_mask, PixelMask};
pub use voc::{emit_voc, parse_voc};
pub use yolo::{emit_yolo, parse_yolo, YoloRecord};

#[derive(Debug, Error, PartialEq)]
pub enum AnnotError {
    #[error("malformed XML: {0}")]
    Xml(String),
    #[error("missing element `{0}`")]
    MissingElement(String),
    #[error("invalid value in `{element}`: {value:?}")]
    InvalidNumber { element: String, value: String },
    #[error("invalid box at {context}: {reason}")]
    InvalidBox { context: String, reason: String },
    #[error("line {line}: expected 5 fields, found {found}")]
    FieldCount { line: usize, found: usize },
    #[error("line {line}: {reason}")]
    YoloValue { line: usize, reason: String },
    #[error("image dimensions must be positive, got {width}x{height}")]
    ImageSize { width: u32, height: u32 },
    #[error("class id {class_id} is not in the class table ({len} entries)")]
    UnknownClass { class_id: u32, len: usize },
    #[error("box {index} lies outside the {width}x{height} image")]
    OutOfBounds { index: usize, width: u32, height: u32 },
}

/// Non-fatal events recorded while ingesting annotations.
#[derive(Debug, Clone, PartialEq)]
pub enum AnnotWarning {
    Clipped {
        context: String,
        original: [f64; 4],
        clipped: BoundingBox,
    },
    Dropped {
        context: String,
        original: [f64; 4],
    },
}

impl std::fmt::Display for AnnotWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AnnotWarning::Clipped {
                context,
                original,
                clipped,
            } => write!(
                f,
                "{context}: box {original:?} clipped to ({}, {}, {}, {})",
                clipped.x_min, clipped.y_min, clipped.x_max, clipped.y_max
            ),
            AnnotWarning::Dropped { context, original } => {
                write!(f, "{context}: box {original:?} has no area inside the image, dropped")
            }
        }
    }
}

/// A parsed value together with the warnings raised while producing it.
#[derive(Debug, Clone, PartialEq)]
pub struct Parsed<T> {
    pub value: T,
    pub warnings: Vec<AnnotWarning>,
}

/// Ordered class names; a class id is an index into this table.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct ClassTable {
    names: Vec<String>,
    index: HashMap<String, u32>,
}

impl From<Vec<String>> for ClassTable {
    fn from(names: Vec<String>) -> Self {
        Self::from_names(names)
    }
}

impl From<ClassTable> for Vec<String> {
    fn from(table: ClassTable) -> Self {
        table.names
    }
}

impl ClassTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_names<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut table = Self::new();
        for name in names {
            table.intern(&name.into());
        }
        table
    }

    /// Reads a `classes.txt` style listing, one name per nonempty line.
    pub fn from_lines(text: &str) -> Self {
        Self::from_names(text.lines().map(str::trim).filter(|l| !l.is_empty()))
    }

    pub fn to_lines(&self) -> String {
        self.names.iter().map(|n| format!("{n}\n")).collect()
    }

    /// Returns the id for `name`, appending it if unseen.
    pub fn intern(&mut self, name: &str) -> u32 {
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        let id = self.names.len() as u32;
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), id);
        id
    }

    pub fn id_of(&self, name: &str) -> Option<u32> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: u32) -> Option<&str> {
        self.names.get(id as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledBox {
    pub bbox: BoundingBox,
    pub class_id: u32,
}

/// Image dimensions plus its ground-truth boxes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedImage {
    pub width: u32,
    pub height: u32,
    pub boxes: Vec<LabeledBox>,
    pub source_id: String,
}

impl AnnotatedImage {
    pub fn new(width: u32, height: u32, source_id: impl Into<String>) -> Result<Self, AnnotError> {
        if width == 0 || height == 0 {
            return Err(AnnotError::ImageSize { width, height });
        }
        Ok(Self {
            width,
            height,
            boxes: Vec::new(),
            source_id: source_id.into(),
        })
    }

    /// Checks every box is inside the image and, when a class table is
    /// given, that its class id is declared.
    pub fn validate(&self, classes: Option<&ClassTable>) -> Result<(), AnnotError> {
        if self.width == 0 || self.height == 0 {
            return Err(AnnotError::ImageSize {
                width: self.width,
                height: self.height,
            });
        }
        for (index, lb) in self.boxes.iter().enumerate() {
            let b = lb.bbox;
            BoundingBox::new(b.x_min, b.y_min, b.x_max, b.y_max)?;
            if !b.is_within(self.width as f64, self.height as f64) {
                return Err(AnnotError::OutOfBounds {
                    index,
                    width: self.width,
                    height: self.height,
                });
            }
            if let Some(table) = classes {
                if lb.class_id as usize >= table.len() {
                    return Err(AnnotError::UnknownClass {
                        class_id: lb.class_id,
                        len: table.len(),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Validates raw corners, then clips to the image. Inverted corners are an
/// error; a box that clips to nothing is dropped with a warning.
pub(crate) fn ingest_box(
    raw: [f64; 4],
    width: u32,
    height: u32,
    context: &str,
    warnings: &mut Vec<AnnotWarning>,
) -> Result<Option<BoundingBox>, AnnotError> {
    let b = BoundingBox::new(raw[0], raw[1], raw[2], raw[3]).map_err(|e| match e {
        AnnotError::InvalidBox { reason, .. } => AnnotError::InvalidBox {
            context: context.to_string(),
            reason,
        },
        other => other,
    })?;
    let (w, h) = (width as f64, height as f64);
    if b.is_within(w, h) {
        return Ok(Some(b));
    }
    match b.clip(w, h) {
        Some(clipped) => {
            warnings.push(AnnotWarning::Clipped {
                context: context.to_string(),
                original: raw,
                clipped,
            });
            Ok(Some(clipped))
        }
        None => {
            warnings.push(AnnotWarning::Dropped {
                context: context.to_string(),
                original: raw,
            });
            Ok(None)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn class_table_interns_in_order() {
        let mut t = ClassTable::new();
        assert_eq!(t.intern("plate"), 0);
        assert_eq!(t.intern("ঢাকা"), 1);
        assert_eq!(t.intern("plate"), 0);
        assert_eq!(t.name(1), Some("ঢাকা"));
        assert_eq!(ClassTable::from_lines(&t.to_lines()), t);
    }

    #[test]
    fn validate_flags_unknown_class_and_out_of_bounds() {
        let mut img = AnnotatedImage::new(10, 10, "a").unwrap();
        img.boxes.push(LabeledBox {
            bbox: BoundingBox::new(0.0, 0.0, 5.0, 5.0).unwrap(),
            class_id: 1,
        });
        let table = ClassTable::from_names(["plate"]);
        assert!(matches!(
            img.validate(Some(&table)),
            Err(AnnotError::UnknownClass { class_id: 1, .. })
        ));
        img.boxes[0].class_id = 0;
        assert!(img.validate(Some(&table)).is_ok());
        img.boxes[0].bbox.x_max = 11.0;
        assert!(matches!(img.validate(None), Err(AnnotError::OutOfBounds { .. })));
    }

    #[test]
    fn ingest_clips_and_drops_with_warnings() {
        let mut warnings = Vec::new();
        let b = ingest_box([-2.0, 1.0, 4.0, 3.0], 10, 10, "obj", &mut warnings).unwrap();
        assert_eq!(b, Some(BoundingBox::new(0.0, 1.0, 4.0, 3.0).unwrap()));
        let gone = ingest_box([12.0, 1.0, 14.0, 3.0], 10, 10, "obj", &mut warnings).unwrap();
        assert_eq!(gone, None);
        assert_eq!(warnings.len(), 2);
        assert!(ingest_box([4.0, 1.0, 2.0, 3.0], 10, 10, "obj", &mut warnings).is_err());
    }
}
