use serde::{Deserialize, Serialize};

use super::raster::{RasterImage, FILL_VALUE};
use super::{AugmentError, Sample};
use crate::annot::{AnnotatedImage, BoundingBox, LabeledBox};

/// One affine draw. `tx`/`ty` are fractions of the image width/height;
/// positive rotation turns content counter-clockwise on screen; shear
/// slants along x only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineParams {
    pub rotation: f64,
    pub tx: f64,
    pub ty: f64,
    pub scale: f64,
    pub shear: f64,
}

impl Default for AffineParams {
    fn default() -> Self {
        Self::identity()
    }
}

impl AffineParams {
    pub fn identity() -> Self {
        Self {
            rotation: 0.0,
            tx: 0.0,
            ty: 0.0,
            scale: 1.0,
            shear: 0.0,
        }
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::identity()
    }

    pub fn validate(&self) -> Result<(), AugmentError> {
        let finite = [self.rotation, self.tx, self.ty, self.scale, self.shear]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(AugmentError::Preset("affine parameters must be finite".into()));
        }
        if self.scale <= 0.0 {
            return Err(AugmentError::Preset(format!("affine scale {} must be positive", self.scale)));
        }
        if self.rotation.abs() >= 90.0 || self.shear.abs() >= 90.0 {
            return Err(AugmentError::Preset("rotation and shear must stay within ±90°".into()));
        }
        Ok(())
    }

    /// Linear part `scale · R(rotation) · Shear_x(shear)` as row-major 2×2.
    pub fn linear(&self) -> [[f64; 2]; 2] {
        let (sin, cos) = self.rotation.to_radians().sin_cos();
        let k = self.shear.to_radians().tan();
        let s = self.scale;
        // R = [[c, s], [-s, c]] turns counter-clockwise when y points down.
        [[s * cos, s * (cos * k + sin)], [-s * sin, s * (cos - sin * k)]]
    }

    /// Maps a point of a `width`×`height` image; rotation and scale pivot
    /// on the image center.
    pub fn map_point(&self, width: u32, height: u32, x: f64, y: f64) -> (f64, f64) {
        let m = self.linear();
        let (cx, cy) = (width as f64 / 2.0, height as f64 / 2.0);
        let (dx, dy) = (x - cx, y - cy);
        (
            m[0][0] * dx + m[0][1] * dy + cx + self.tx * width as f64,
            m[1][0] * dx + m[1][1] * dy + cy + self.ty * height as f64,
        )
    }
}

#[derive(Clone, Copy)]
pub(crate) enum Edge {
    Fill(u8),
    Clamp,
}

/// Bilinear sample at continuous pixel-index coordinates (pixel `i` sits at
/// `i`). Taps with zero weight are skipped so exact positions never blend in
/// border fill.
pub(crate) fn sample_bilinear(img: &RasterImage, u: f64, v: f64, edge: Edge) -> [u8; 3] {
    let (w, h) = (img.width() as i64, img.height() as i64);
    let (u, v) = match edge {
        Edge::Clamp => (u.clamp(0.0, (w - 1) as f64), v.clamp(0.0, (h - 1) as f64)),
        Edge::Fill(_) => (u, v),
    };
    let (x0, y0) = (u.floor(), v.floor());
    let (fx, fy) = (u - x0, v - y0);
    let (x0, y0) = (x0 as i64, y0 as i64);
    let mut acc = [0.0f64; 3];
    for (dx, dy, wgt) in [
        (0, 0, (1.0 - fx) * (1.0 - fy)),
        (1, 0, fx * (1.0 - fy)),
        (0, 1, (1.0 - fx) * fy),
        (1, 1, fx * fy),
    ] {
        if wgt == 0.0 {
            continue;
        }
        let (x, y) = (x0 + dx, y0 + dy);
        let px = if (0..w).contains(&x) && (0..h).contains(&y) {
            img.pixel(x as u32, y as u32)
        } else {
            match edge {
                Edge::Fill(f) => [f; 3],
                Edge::Clamp => img.pixel(x.clamp(0, w - 1) as u32, y.clamp(0, h - 1) as u32),
            }
        };
        for c in 0..3 {
            acc[c] += wgt * px[c] as f64;
        }
    }
    acc.map(|a| a.round().clamp(0.0, 255.0) as u8)
}

/// Axis-aligned hull of a box after `params`, before clipping.
pub(crate) fn map_box(params: &AffineParams, width: u32, height: u32, b: &BoundingBox) -> BoundingBox {
    let pts = b.corners().map(|(x, y)| params.map_point(width, height, x, y));
    let fold = |f: fn(f64, f64) -> f64, init: f64, pick: fn(&(f64, f64)) -> f64| {
        pts.iter().map(pick).fold(init, f)
    };
    BoundingBox {
        x_min: fold(f64::min, f64::INFINITY, |p| p.0),
        y_min: fold(f64::min, f64::INFINITY, |p| p.1),
        x_max: fold(f64::max, f64::NEG_INFINITY, |p| p.0),
        y_max: fold(f64::max, f64::NEG_INFINITY, |p| p.1),
    }
}

/// Box survival after clipping: at least 1 px² and at least a tenth of the
/// transformed (unclipped) hull.
fn survives(hull: &BoundingBox, clipped: &BoundingBox) -> bool {
    let area = clipped.area();
    area >= 1.0 && area >= 0.1 * hull.area()
}

/// Warps pixels and labels together. Uncovered pixels get [`FILL_VALUE`].
pub fn apply_affine(sample: &Sample, params: &AffineParams) -> Result<Sample, AugmentError> {
    params.validate()?;
    if params.is_identity() {
        return Ok(sample.clone());
    }
    let (w, h) = (sample.width(), sample.height());
    let m = params.linear();
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let inv = [[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]];
    let (cx, cy) = (w as f64 / 2.0, h as f64 / 2.0);
    let (tx, ty) = (params.tx * w as f64, params.ty * h as f64);
    let src = &sample.image;
    let image = RasterImage::from_fn(w, h, |x, y| {
        // Pixel centers sit at +0.5 in continuous coordinates.
        let qx = x as f64 + 0.5 - cx - tx;
        let qy = y as f64 + 0.5 - cy - ty;
        let px = inv[0][0] * qx + inv[0][1] * qy + cx;
        let py = inv[1][0] * qx + inv[1][1] * qy + cy;
        sample_bilinear(src, px - 0.5, py - 0.5, Edge::Fill(FILL_VALUE))
    });
    let boxes = sample
        .labels
        .boxes
        .iter()
        .filter_map(|lb| {
            let hull = map_box(params, w, h, &lb.bbox);
            let clipped = hull.clip(w as f64, h as f64)?;
            survives(&hull, &clipped).then_some(LabeledBox {
                bbox: clipped,
                class_id: lb.class_id,
            })
        })
        .collect();
    Ok(Sample {
        labels: AnnotatedImage {
            boxes,
            ..sample.labels.clone()
        },
        image,
    })
}

/// Mirrors pixels and boxes about the vertical center line.
pub fn hflip(sample: &Sample) -> Sample {
    let (w, h) = (sample.width(), sample.height());
    let image = RasterImage::from_fn(w, h, |x, y| sample.image.pixel(w - 1 - x, y));
    let wf = w as f64;
    let boxes = sample
        .labels
        .boxes
        .iter()
        .map(|lb| LabeledBox {
            bbox: BoundingBox {
                x_min: wf - lb.bbox.x_max,
                y_min: lb.bbox.y_min,
                x_max: wf - lb.bbox.x_min,
                y_max: lb.bbox.y_max,
            },
            class_id: lb.class_id,
        })
        .collect();
    Sample {
        labels: AnnotatedImage {
            boxes,
            ..sample.labels.clone()
        },
        image,
    }
}

pub(crate) fn resize_image(img: &RasterImage, width: u32, height: u32) -> RasterImage {
    if img.width() == width && img.height() == height {
        return img.clone();
    }
    let sx = img.width() as f64 / width as f64;
    let sy = img.height() as f64 / height as f64;
    RasterImage::from_fn(width, height, |x, y| {
        let u = (x as f64 + 0.5) * sx - 0.5;
        let v = (y as f64 + 0.5) * sy - 0.5;
        sample_bilinear(img, u, v, Edge::Clamp)
    })
}

/// Bilinear resize with labels scaled to match. Boxes that shrink to zero
/// area are dropped.
pub fn resize_sample(sample: &Sample, width: u32, height: u32) -> Result<Sample, AugmentError> {
    let labels = AnnotatedImage::new(width, height, sample.labels.source_id.clone())?;
    let sx = width as f64 / sample.width() as f64;
    let sy = height as f64 / sample.height() as f64;
    let boxes = sample
        .labels
        .boxes
        .iter()
        .filter_map(|lb| {
            let b = lb.bbox.scale(sx, sy).clip(width as f64, height as f64)?;
            Some(LabeledBox {
                bbox: b,
                class_id: lb.class_id,
            })
        })
        .collect();
    Ok(Sample {
        labels: AnnotatedImage { boxes, ..labels },
        image: resize_image(&sample.image, width, height),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_with(w: u32, h: u32, boxes: &[[f64; 4]]) -> Sample {
        let mut labels = AnnotatedImage::new(w, h, "t").unwrap();
        for b in boxes {
            labels.boxes.push(LabeledBox {
                bbox: BoundingBox::new(b[0], b[1], b[2], b[3]).unwrap(),
                class_id: 0,
            });
        }
        let image = RasterImage::from_fn(w, h, |x, y| [(x * 7 % 256) as u8, (y * 13 % 256) as u8, 50]);
        Sample::new(image, labels).unwrap()
    }

    #[test]
    fn identity_is_exact() {
        let s = sample_with(40, 30, &[[3.3, 4.1, 20.7, 25.0]]);
        assert_eq!(apply_affine(&s, &AffineParams::identity()).unwrap(), s);
    }

    #[test]
    fn pure_translation_shifts_box_and_pixels() {
        let s = sample_with(100, 100, &[[10.0, 10.0, 20.0, 20.0]]);
        let p = AffineParams {
            tx: 0.1,
            ..AffineParams::identity()
        };
        let out = apply_affine(&s, &p).unwrap();
        let b = out.labels.boxes[0].bbox;
        assert_eq!([b.x_min, b.y_min, b.x_max, b.y_max], [20.0, 10.0, 30.0, 20.0]);
        assert_eq!(out.image.pixel(15, 7), s.image.pixel(5, 7));
        assert_eq!(out.image.pixel(3, 7), [FILL_VALUE; 3]);
    }

    #[test]
    fn box_pushed_out_is_dropped() {
        let s = sample_with(100, 100, &[[90.0, 10.0, 99.0, 20.0]]);
        let p = AffineParams {
            tx: 0.1,
            ..AffineParams::identity()
        };
        assert!(apply_affine(&s, &p).unwrap().labels.boxes.is_empty());
    }

    #[test]
    fn mostly_clipped_box_is_dropped() {
        // 95% of the shifted box leaves the frame.
        let s = sample_with(100, 100, &[[50.0, 10.0, 90.0, 20.0]]);
        let p = AffineParams {
            tx: 0.48,
            ..AffineParams::identity()
        };
        assert!(apply_affine(&s, &p).unwrap().labels.boxes.is_empty());
    }

    #[test]
    fn hflip_examples() {
        let s = sample_with(100, 60, &[[10.0, 20.0, 30.0, 40.0], [40.0, 0.0, 60.0, 10.0]]);
        let f = hflip(&s);
        let b = f.labels.boxes[0].bbox;
        assert_eq!([b.x_min, b.y_min, b.x_max, b.y_max], [70.0, 20.0, 90.0, 40.0]);
        assert_eq!(f.labels.boxes[1].bbox, s.labels.boxes[1].bbox);
        assert_eq!(f.image.pixel(0, 3), s.image.pixel(99, 3));
        assert_eq!(hflip(&f), s);
    }

    #[test]
    fn invalid_params_rejected() {
        let p = AffineParams {
            scale: 0.0,
            ..AffineParams::identity()
        };
        assert!(apply_affine(&sample_with(4, 4, &[]), &p).is_err());
    }

    #[test]
    fn resize_same_size_is_copy_and_halving_averages() {
        let s = sample_with(8, 6, &[[2.0, 2.0, 6.0, 4.0]]);
        assert_eq!(resize_sample(&s, 8, 6).unwrap(), s);
        let img = RasterImage::from_fn(4, 2, |x, _| if x % 2 == 0 { [0; 3] } else { [200; 3] });
        let half = resize_image(&img, 2, 1);
        assert_eq!(half.pixel(0, 0), [100; 3]);
    }
}
