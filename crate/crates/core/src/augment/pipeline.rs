use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::color::hsv_jitter;
use super::composite::{copy_paste, mixup, mosaic, symmetric};
use super::geometry::{apply_affine, hflip, resize_sample, AffineParams};
use super::preset::AugmentationPhasePreset;
use super::{AugmentError, Sample};

/// How the mix-up weight is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MixupLambda {
    Fixed(f64),
    /// Symmetric `Beta(alpha, alpha)` draw per application.
    Beta { alpha: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineOptions {
    pub mixup_lambda: MixupLambda,
    pub mosaic_center_jitter: f64,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            mixup_lambda: MixupLambda::Fixed(0.5),
            mosaic_center_jitter: 0.5,
        }
    }
}

/// What the pipeline did to one item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppliedOps {
    pub mosaic: bool,
    /// Mix-up weight, when mix-up fired.
    pub mixup: Option<f64>,
    /// Copy-paste fired (it may still have found no placement).
    pub copy_paste: bool,
    pub affine: AffineParams,
    pub hflip: bool,
    /// Hue shift, saturation gain, value gain.
    pub hsv: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Augmented {
    pub sample: Sample,
    pub applied: AppliedOps,
}

/// RNG for batch item `index`: ChaCha8 seeded from `seed`, on stream
/// `index`. Streams never overlap, so items can run on any thread.
pub fn item_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Augments every item of `batch` independently and in parallel.
///
/// Per item, in order: mosaic with three partners drawn from the batch with
/// replacement, mix-up with one partner, copy-paste from one partner,
/// affine, horizontal flip, HSV jitter. Each composite draws its own
/// probability; affine and HSV draws happen on every item (zero magnitudes
/// yield the identity). The output depends only on `(seed, preset, batch
/// order, options)`.
pub fn sample_pipeline(
    batch: &[Sample],
    preset: &AugmentationPhasePreset,
    seed: u64,
    options: &PipelineOptions,
) -> Result<Vec<Augmented>, AugmentError> {
    if batch.is_empty() {
        return Err(AugmentError::EmptyBatch);
    }
    preset.validate()?;
    if !(0.0..1.0).contains(&options.mosaic_center_jitter) {
        return Err(AugmentError::CenterJitter(options.mosaic_center_jitter));
    }
    let beta = match options.mixup_lambda {
        MixupLambda::Fixed(l) if !(0.0..=1.0).contains(&l) => return Err(AugmentError::Lambda(l)),
        MixupLambda::Fixed(_) => None,
        MixupLambda::Beta { alpha } => Some(
            Beta::new(alpha, alpha).map_err(|e| AugmentError::Preset(format!("mix-up beta: {e}")))?,
        ),
    };
    batch
        .par_iter()
        .enumerate()
        .map(|(i, item)| {
            let mut rng = item_rng(seed, i);
            augment_one(batch, item, preset, options, beta.as_ref(), &mut rng)
        })
        .collect()
}

fn augment_one(
    batch: &[Sample],
    item: &Sample,
    preset: &AugmentationPhasePreset,
    options: &PipelineOptions,
    beta: Option<&Beta<f64>>,
    rng: &mut ChaCha8Rng,
) -> Result<Augmented, AugmentError> {
    let n = batch.len();
    let mut cur = item.clone();
    let (w, h) = (item.width(), item.height());
    // Partners are resized to the current item's size.
    let partner = |rng: &mut ChaCha8Rng| resize_sample(&batch[rng.random_range(0..n)], w, h);

    let do_mosaic = rng.random_bool(preset.mosaic_p);
    if do_mosaic {
        let mut four = vec![cur];
        for _ in 0..3 {
            four.push(partner(rng)?);
        }
        cur = mosaic(&four, options.mosaic_center_jitter, rng)?;
    }

    let mut mix = None;
    if rng.random_bool(preset.mixup_p) {
        let other = partner(rng)?;
        let lambda = match beta {
            Some(d) => d.sample(rng),
            None => match options.mixup_lambda {
                MixupLambda::Fixed(l) => l,
                MixupLambda::Beta { .. } => unreachable!("beta distribution prepared above"),
            },
        };
        cur = mixup(&cur, &other, lambda)?;
        mix = Some(lambda);
    }

    let do_paste = rng.random_bool(preset.copypaste_p);
    if do_paste {
        let src = partner(rng)?;
        cur = copy_paste(&cur, &src, rng);
    }

    let affine = AffineParams {
        rotation: symmetric(rng, preset.rotation_deg),
        tx: symmetric(rng, preset.translation_frac),
        ty: symmetric(rng, preset.translation_frac),
        scale: 1.0 + symmetric(rng, preset.scale_factor),
        shear: symmetric(rng, preset.shear_deg),
    };
    // Normalise -0.0 draws so identity detection is exact.
    let affine = AffineParams {
        rotation: affine.rotation + 0.0,
        tx: affine.tx + 0.0,
        ty: affine.ty + 0.0,
        scale: affine.scale,
        shear: affine.shear + 0.0,
    };
    cur = apply_affine(&cur, &affine)?;

    let do_flip = rng.random_bool(preset.hflip_p);
    if do_flip {
        cur = hflip(&cur);
    }

    let hsv = [
        symmetric(rng, preset.hue_frac) + 0.0,
        1.0 + symmetric(rng, preset.sat_frac),
        1.0 + symmetric(rng, preset.val_frac),
    ];
    cur = hsv_jitter(&cur, hsv[0], hsv[1], hsv[2]);

    Ok(Augmented {
        sample: cur,
        applied: AppliedOps {
            mosaic: do_mosaic,
            mixup: mix,
            copy_paste: do_paste,
            affine,
            hflip: do_flip,
            hsv,
        },
    })
}
