//! Annotation conversion with the input tree mirrored under the output dir.

use std::path::{Path, PathBuf};

use plate_toolkit::annot::{emit_voc, emit_yolo, parse_voc, parse_yolo, rasterize_mask, ClassTable, Parsed};
use plate_toolkit::annot::AnnotatedImage;
use plate_toolkit::augment::RasterImage;

use crate::args::{ConvertArgs, Format, Global, InFormat, OutFormat};
use crate::error::{data, CliError};
use crate::files;

pub fn run(g: &Global, a: &ConvertArgs) -> Result<(), CliError> {
    let mut classes = match &a.classes {
        Some(p) => ClassTable::from_lines(&files::read(p)?),
        None => ClassTable::new(),
    };
    let inputs = files::collect(&a.inputs, |p| match a.from {
        InFormat::Voc => files::has_ext(p, &["xml"]),
        InFormat::Yolo => files::has_ext(p, &["txt"]) && p.file_name().is_some_and(|n| n != "classes.txt"),
    })?;
    if inputs.is_empty() {
        return Err(CliError::Data("no annotation files found".into()));
    }

    let mut warnings = 0usize;
    for found in &inputs {
        let text = files::read(&found.path)?;
        let parsed = match a.from {
            InFormat::Voc => parse_voc(&text, &mut classes),
            InFormat::Yolo => {
                let (w, h) = yolo_size(&found.path, a.size)?;
                parse_yolo(&text, w, h)
            }
        }
        .map_err(|e| data(found.path.display(), e))?;
        let Parsed { value: mut image, warnings: ws } = parsed;
        if image.source_id.is_empty() {
            image.source_id = files::id_of(&found.rel);
        }
        warnings += ws.len();
        if g.verbose > 0 {
            for w in &ws {
                eprintln!("warning: {}: {w}", found.path.display());
            }
        }
        let (ext, bytes) = render(&image, a.to, &classes);
        files::write(&target(&g.output_dir, &found.rel, ext), bytes)?;
    }
    if a.from == InFormat::Voc && a.to == OutFormat::Yolo {
        files::write(&g.output_dir.join("classes.txt"), classes.to_lines())?;
    }

    match g.format {
        Format::Text => println!("converted {} files, {} warnings", inputs.len(), warnings),
        Format::Csv => println!("files,warnings\n{},{}", inputs.len(), warnings),
    }
    Ok(())
}

fn yolo_size(label: &Path, size: Option<(u32, u32)>) -> Result<(u32, u32), CliError> {
    if let Some(s) = size {
        return Ok(s);
    }
    let img = files::sibling_image(label).ok_or_else(|| {
        CliError::Data(format!(
            "{}: no sibling image to read dimensions from; pass --size WxH",
            label.display()
        ))
    })?;
    RasterImage::dimensions_of(&img).map_err(|e| data(img.display(), e))
}

fn render(image: &AnnotatedImage, to: OutFormat, classes: &ClassTable) -> (&'static str, Vec<u8>) {
    match to {
        OutFormat::Voc => ("xml", emit_voc(image, classes).into_bytes()),
        OutFormat::Yolo => ("txt", emit_yolo(image).into_bytes()),
        OutFormat::Mask => ("pgm", rasterize_mask(image).to_pgm()),
    }
}

fn target(out_dir: &Path, rel: &Path, ext: &str) -> PathBuf {
    out_dir.join(rel).with_extension(ext)
}
