use rand::Rng;

use super::geometry::resize_sample;
use super::raster::RasterImage;
use super::{AugmentError, Sample};
use crate::annot::{AnnotatedImage, LabeledBox};
use crate::detmetrics::iou;

/// Placement attempts before copy-paste gives up.
pub const COPY_PASTE_TRIES: usize = 20;
/// A placement is rejected once it overlaps any existing box this much.
pub const COPY_PASTE_MAX_OVERLAP: f64 = 0.3;

/// Uniform draw in `[-mag, mag]`; always consumes one value.
pub(crate) fn symmetric<R: Rng + ?Sized>(rng: &mut R, mag: f64) -> f64 {
    (rng.random::<f64>() * 2.0 - 1.0) * mag
}

/// The 2W×2H composite before it is shrunk back, where W×H is the size of
/// `images[0]`.
///
/// The split point is `(W·(1+ux), H·(1+uy))` rounded to whole pixels, with
/// `ux` then `uy` drawn from `±center_jitter`. Inputs fill the top-left,
/// top-right, bottom-left and bottom-right quadrants in order, each resized
/// to its quadrant.
pub fn mosaic_canvas<R: Rng + ?Sized>(
    images: &[Sample],
    center_jitter: f64,
    rng: &mut R,
) -> Result<Sample, AugmentError> {
    if images.len() != 4 {
        return Err(AugmentError::MosaicInputs(images.len()));
    }
    if !(0.0..1.0).contains(&center_jitter) {
        return Err(AugmentError::CenterJitter(center_jitter));
    }
    let (w, h) = (images[0].width(), images[0].height());
    let (cw, ch) = (2 * w, 2 * h);
    let ux = symmetric(rng, center_jitter);
    let uy = symmetric(rng, center_jitter);
    let cx = ((w as f64 * (1.0 + ux)).round() as u32).clamp(1, cw - 1);
    let cy = ((h as f64 * (1.0 + uy)).round() as u32).clamp(1, ch - 1);
    let quadrants = [
        (0, 0, cx, cy),
        (cx, 0, cw - cx, cy),
        (0, cy, cx, ch - cy),
        (cx, cy, cw - cx, ch - cy),
    ];

    let mut image = RasterImage::filled(cw, ch, [0; 3]);
    let mut labels = AnnotatedImage::new(cw, ch, images[0].labels.source_id.clone())?;
    for (src, &(qx, qy, qw, qh)) in images.iter().zip(&quadrants) {
        let part = resize_sample(src, qw, qh)?;
        image.paste(&part.image, qx, qy);
        labels.boxes.extend(part.labels.boxes.iter().map(|lb| LabeledBox {
            bbox: lb.bbox.translate(qx as f64, qy as f64),
            class_id: lb.class_id,
        }));
    }
    Ok(Sample { labels, image })
}

/// Four-image composite at the size of `images[0]`.
pub fn mosaic<R: Rng + ?Sized>(images: &[Sample], center_jitter: f64, rng: &mut R) -> Result<Sample, AugmentError> {
    let canvas = mosaic_canvas(images, center_jitter, rng)?;
    resize_sample(&canvas, images[0].width(), images[0].height())
}

/// `λ·a + (1-λ)·b` per channel, rounded half away from zero; labels of both.
pub fn mixup(a: &Sample, b: &Sample, lambda: f64) -> Result<Sample, AugmentError> {
    if (a.width(), a.height()) != (b.width(), b.height()) {
        return Err(AugmentError::DimensionMismatch(a.width(), a.height(), b.width(), b.height()));
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(AugmentError::Lambda(lambda));
    }
    let data = a
        .image
        .data()
        .iter()
        .zip(b.image.data())
        .map(|(&pa, &pb)| (lambda * pa as f64 + (1.0 - lambda) * pb as f64).round() as u8)
        .collect();
    let image = RasterImage::from_raw(a.width(), a.height(), data)?;
    let mut labels = a.labels.clone();
    labels.boxes.extend_from_slice(&b.labels.boxes);
    Ok(Sample { labels, image })
}

/// Transplants one randomly chosen `src` object into `dst`.
///
/// The pixel block is the whole-pixel cover of the source box. A random
/// position is accepted when the pasted box has IoU below
/// [`COPY_PASTE_MAX_OVERLAP`] with every existing box and no existing box
/// covers that much of the pasted box either. After [`COPY_PASTE_TRIES`]
/// rejections `dst` comes back unchanged, as it does when `src` has no
/// boxes or the block does not fit.
pub fn copy_paste<R: Rng + ?Sized>(dst: &Sample, src: &Sample, rng: &mut R) -> Sample {
    if src.labels.boxes.is_empty() {
        return dst.clone();
    }
    let chosen = src.labels.boxes[rng.random_range(0..src.labels.boxes.len())];
    let b = chosen.bbox;
    let x0 = b.x_min.floor().max(0.0) as u32;
    let y0 = b.y_min.floor().max(0.0) as u32;
    let x1 = (b.x_max.ceil() as u32).min(src.width());
    let y1 = (b.y_max.ceil() as u32).min(src.height());
    let (rw, rh) = (x1 - x0, y1 - y0);
    if rw == 0 || rh == 0 || rw > dst.width() || rh > dst.height() {
        return dst.clone();
    }
    for _ in 0..COPY_PASTE_TRIES {
        let nx = rng.random_range(0..=dst.width() - rw);
        let ny = rng.random_range(0..=dst.height() - rh);
        let moved = b.translate(nx as f64 - x0 as f64, ny as f64 - y0 as f64);
        let clear = dst.labels.boxes.iter().all(|lb| {
            iou(&moved, &lb.bbox) < COPY_PASTE_MAX_OVERLAP
                && moved.intersection_area(&lb.bbox) / moved.area() < COPY_PASTE_MAX_OVERLAP
        });
        if clear {
            let mut out = dst.clone();
            out.image.paste(&src.image.crop(x0, y0, rw, rh), nx, ny);
            out.labels.boxes.push(LabeledBox {
                bbox: moved,
                class_id: chosen.class_id,
            });
            return out;
        }
    }
    dst.clone()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annot::BoundingBox;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample(w: u32, h: u32, boxes: &[[f64; 4]], rgb: [u8; 3]) -> Sample {
        let mut labels = AnnotatedImage::new(w, h, "s").unwrap();
        for b in boxes {
            labels.boxes.push(LabeledBox {
                bbox: BoundingBox::new(b[0], b[1], b[2], b[3]).unwrap(),
                class_id: 1,
            });
        }
        Sample::new(RasterImage::filled(w, h, rgb), labels).unwrap()
    }

    #[test]
    fn mixup_examples() {
        let black = sample(4, 4, &[[0.0, 0.0, 1.0, 1.0]], [0; 3]);
        let white = sample(4, 4, &[[1.0, 1.0, 2.0, 2.0], [2.0, 2.0, 3.0, 3.0]], [255; 3]);
        let mid = mixup(&black, &white, 0.5).unwrap();
        assert!(mid.image.data().iter().all(|&v| v == 128));
        assert_eq!(mid.labels.boxes.len(), 3);
        let a = mixup(&black, &white, 1.0).unwrap();
        assert_eq!(a.image, black.image);
        assert!(matches!(
            mixup(&black, &sample(5, 4, &[], [0; 3]), 0.5),
            Err(AugmentError::DimensionMismatch(..))
        ));
    }

    #[test]
    fn mosaic_needs_four() {
        let s = sample(4, 4, &[], [0; 3]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            mosaic(&[s.clone(), s.clone(), s], 0.0, &mut rng),
            Err(AugmentError::MosaicInputs(3))
        ));
    }

    #[test]
    fn centered_mosaic_tiles_four_copies() {
        let s = sample(10, 8, &[[1.0, 2.0, 4.0, 5.0]], [9, 8, 7]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let canvas = mosaic_canvas(&[s.clone(), s.clone(), s.clone(), s.clone()], 0.0, &mut rng).unwrap();
        let got: Vec<[f64; 4]> = canvas
            .labels
            .boxes
            .iter()
            .map(|lb| [lb.bbox.x_min, lb.bbox.y_min, lb.bbox.x_max, lb.bbox.y_max])
            .collect();
        assert_eq!(
            got,
            vec![
                [1.0, 2.0, 4.0, 5.0],
                [11.0, 2.0, 14.0, 5.0],
                [1.0, 10.0, 4.0, 13.0],
                [11.0, 10.0, 14.0, 13.0]
            ]
        );
        assert_eq!(canvas.image.crop(10, 8, 10, 8), s.image);
        let shrunk = mosaic(&[s.clone(), s.clone(), s.clone(), s], 0.0, &mut rng).unwrap();
        assert_eq!((shrunk.width(), shrunk.height()), (10, 8));
        assert_eq!(shrunk.labels.boxes.len(), 4);
    }

    #[test]
    fn copy_paste_into_empty_copies_block() {
        let src = Sample::new(
            RasterImage::from_fn(20, 20, |x, y| [x as u8, y as u8, 1]),
            sample(20, 20, &[[3.0, 4.0, 9.0, 8.0]], [0; 3]).labels,
        )
        .unwrap();
        let dst = sample(30, 30, &[], [200; 3]);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let out = copy_paste(&dst, &src, &mut rng);
        assert_eq!(out.labels.boxes.len(), 1);
        let b = out.labels.boxes[0].bbox;
        let (nx, ny) = (b.x_min as u32, b.y_min as u32);
        assert_eq!(out.image.crop(nx, ny, 6, 4), src.image.crop(3, 4, 6, 4));

        let mut replay = ChaCha8Rng::seed_from_u64(11);
        assert_eq!(copy_paste(&dst, &src, &mut replay), out);
    }

    #[test]
    fn copy_paste_gives_up_when_covered() {
        let src = sample(20, 20, &[[3.0, 4.0, 9.0, 8.0]], [5; 3]);
        let dst = sample(30, 30, &[[0.0, 0.0, 30.0, 30.0]], [200; 3]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(copy_paste(&dst, &src, &mut rng), dst);
    }
}
