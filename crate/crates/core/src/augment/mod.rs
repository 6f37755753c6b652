//! Seedable augmentation of images together with their box labels.
//!
//! Every transform takes a [`Sample`] (pixels plus labels) and returns a new
//! one with labels carried through the same geometry. Only horizontal flips
//! and affine warps (rotation, translation, uniform scale, x-shear) exist;
//! there is no vertical flip and no perspective warp.

mod color;
mod composite;
mod geometry;
mod pipeline;
mod preset;
mod raster;

use thiserror::Error;

use crate::annot::{AnnotError, AnnotatedImage};

pub use color::{hsv_jitter, hsv_to_rgb, rgb_to_hsv};
pub use composite::{copy_paste, mixup, mosaic, mosaic_canvas, COPY_PASTE_MAX_OVERLAP, COPY_PASTE_TRIES};
pub use geometry::{apply_affine, hflip, resize_sample, AffineParams};
pub use pipeline::{item_rng, sample_pipeline, AppliedOps, Augmented, MixupLambda, PipelineOptions};
pub use preset::{stage1_preset, stage2_preset, AugmentationPhasePreset};
pub use raster::{RasterImage, FILL_VALUE};

#[derive(Debug, Error)]
pub enum AugmentError {
    #[error("image is {image_w}x{image_h} but labels are {label_w}x{label_h}")]
    LabelSize {
        image_w: u32,
        image_h: u32,
        label_w: u32,
        label_h: u32,
    },
    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(u32, u32, u32, u32),
    #[error("mix-up weight {0} outside [0, 1]")]
    Lambda(f64),
    #[error("mosaic needs exactly 4 images, got {0}")]
    MosaicInputs(usize),
    #[error("mosaic center jitter {0} outside [0, 1)")]
    CenterJitter(f64),
    #[error("batch is empty")]
    EmptyBatch,
    #[error("invalid preset: {0}")]
    Preset(String),
    #[error("preset override line {line}: {reason}")]
    Override { line: usize, reason: String },
    #[error("pixel buffer has {found} bytes, expected {expected}")]
    Buffer { expected: usize, found: usize },
    #[error(transparent)]
    Annot(#[from] AnnotError),
    #[error("image I/O: {0}")]
    Image(String),
}

/// Pixels plus the labels that describe them; both share one size.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub labels: AnnotatedImage,
    pub image: RasterImage,
}

impl Sample {
    pub fn new(image: RasterImage, labels: AnnotatedImage) -> Result<Self, AugmentError> {
        if image.width() != labels.width || image.height() != labels.height {
            return Err(AugmentError::LabelSize {
                image_w: image.width(),
                image_h: image.height(),
                label_w: labels.width,
                label_h: labels.height,
            });
        }
        Ok(Self { labels, image })
    }

    pub fn width(&self) -> u32 {
        self.image.width()
    }

    pub fn height(&self) -> u32 {
        self.image.height()
    }
}
