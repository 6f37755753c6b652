//! Augmented dataset generation.

use std::path::Path;

use plate_toolkit::annot::{emit_yolo, parse_yolo, AnnotatedImage};
use plate_toolkit::augment::{
    sample_pipeline, stage1_preset, stage2_preset, MixupLambda, PipelineOptions, RasterImage, Sample,
};

use crate::args::{AugmentArgs, Format, Global};
use crate::error::{data, CliError};
use crate::files;

struct Source {
    stem: String,
    sample: Sample,
}

pub fn run(g: &Global, a: &AugmentArgs) -> Result<(), CliError> {
    let mut preset = if a.stage == 1 { stage1_preset() } else { stage2_preset() };
    if let Some(p) = &a.preset_overrides {
        preset = preset
            .with_overrides(&files::read(p)?)
            .map_err(|e| data(p.display(), e))?;
    }
    preset.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    if !(0.0..1.0).contains(&a.mosaic_jitter) {
        return Err(CliError::Usage(format!("--mosaic-jitter must lie in [0, 1), got {}", a.mosaic_jitter)));
    }
    let mixup_lambda = match a.mixup_beta {
        Some(alpha) if !(alpha > 0.0 && alpha.is_finite()) => {
            return Err(CliError::Usage(format!("--mixup-beta must be positive, got {alpha}")))
        }
        Some(alpha) => MixupLambda::Beta { alpha },
        None => PipelineOptions::default().mixup_lambda,
    };
    let options = PipelineOptions {
        mixup_lambda,
        mosaic_center_jitter: a.mosaic_jitter,
    };

    let (sources, skipped) = load_dataset(&a.dataset, g.verbose)?;
    if sources.is_empty() {
        return Err(CliError::Data(format!(
            "{}: no usable image/label pairs ({skipped} skipped)",
            a.dataset.display()
        )));
    }

    // Item k starts from source k mod n; its random stream is k.
    let n = sources.len();
    let batch: Vec<Sample> = (0..a.count as usize).map(|k| sources[k % n].sample.clone()).collect();
    let out = sample_pipeline(&batch, &preset, g.seed, &options).map_err(|e| data("augmentation", e))?;

    let mut counts = [0usize; 4];
    for (k, aug) in out.iter().enumerate() {
        let name = format!("{}_aug{k}", sources[k % n].stem);
        let img_path = g.output_dir.join(format!("{name}.png"));
        if let Some(dir) = img_path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| data(dir.display(), e))?;
        }
        aug.sample.image.save_png(&img_path).map_err(|e| data(img_path.display(), e))?;
        files::write(&g.output_dir.join(format!("{name}.txt")), emit_yolo(&aug.sample.labels))?;
        let ops = &aug.applied;
        for (slot, hit) in [ops.mosaic, ops.mixup.is_some(), ops.copy_paste, ops.hflip].into_iter().enumerate() {
            counts[slot] += hit as usize;
        }
    }

    let total = out.len() as f64;
    let names = ["mosaic", "mixup", "copy_paste", "hflip"];
    match g.format {
        Format::Text => {
            println!("wrote {} pairs from {} sources ({} skipped)", out.len(), n, skipped);
            println!("{:<12}{:>8}{:>9}", "op", "count", "rate");
            for (name, c) in names.iter().zip(counts) {
                println!("{name:<12}{c:>8}{:>9.3}", c as f64 / total);
            }
        }
        Format::Csv => {
            println!("op,count,rate");
            for (name, c) in names.iter().zip(counts) {
                println!("{name},{c},{:.6}", c as f64 / total);
            }
        }
    }
    Ok(())
}

/// Loads every image with a same-stem `.txt` label. Unreadable pairs are
/// skipped with a warning; a missing label file means no boxes.
fn load_dataset(dir: &Path, verbose: u8) -> Result<(Vec<Source>, usize), CliError> {
    let found = files::collect(&[dir.to_path_buf()], |p| files::has_ext(p, &["png", "jpg", "jpeg"]))?;
    let mut sources = Vec::new();
    let mut skipped = 0;
    for f in found {
        match load_pair(&f.path) {
            Ok(sample) => sources.push(Source {
                stem: files::id_of(&f.rel),
                sample,
            }),
            Err(e) => {
                skipped += 1;
                eprintln!("warning: skipping {}: {e}", f.path.display());
            }
        }
    }
    if verbose > 0 {
        eprintln!("loaded {} samples", sources.len());
    }
    Ok((sources, skipped))
}

fn load_pair(image_path: &Path) -> Result<Sample, String> {
    let image = RasterImage::load(image_path).map_err(|e| e.to_string())?;
    let (w, h) = (image.width(), image.height());
    let label_path = image_path.with_extension("txt");
    let labels = if label_path.is_file() {
        let text = std::fs::read_to_string(&label_path).map_err(|e| e.to_string())?;
        parse_yolo(&text, w, h).map_err(|e| format!("{}: {e}", label_path.display()))?.value
    } else {
        AnnotatedImage::new(w, h, "").map_err(|e| e.to_string())?
    };
    Sample::new(image, labels).map_err(|e| e.to_string())
}
