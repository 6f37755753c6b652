use std::fs;
use std::path::{Path, PathBuf};

use walkdir::WalkDir;

use crate::error::{data, CliError};

/// A discovered input: its path and where it sits relative to the input root.
#[derive(Debug, Clone)]
pub struct Found {
    pub path: PathBuf,
    pub rel: PathBuf,
}

/// Files under each input whose extension passes `keep`, in a stable order.
/// Plain file inputs are taken as given.
pub fn collect(inputs: &[PathBuf], keep: impl Fn(&Path) -> bool) -> Result<Vec<Found>, CliError> {
    let mut out = Vec::new();
    for input in inputs {
        let meta = fs::metadata(input).map_err(|e| data(input.display(), e))?;
        if meta.is_file() {
            let name = input.file_name().map(PathBuf::from).unwrap_or_else(|| input.clone());
            out.push(Found {
                path: input.clone(),
                rel: name,
            });
            continue;
        }
        for entry in WalkDir::new(input).sort_by_file_name() {
            let entry = entry.map_err(|e| data(input.display(), e))?;
            if entry.file_type().is_file() && keep(entry.path()) {
                let rel = entry.path().strip_prefix(input).expect("walk stays under root").to_path_buf();
                out.push(Found {
                    path: entry.path().to_path_buf(),
                    rel,
                });
            }
        }
    }
    Ok(out)
}

pub fn has_ext(path: &Path, exts: &[&str]) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| exts.iter().any(|x| x.eq_ignore_ascii_case(e)))
}

pub fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| data(path.display(), e))
}

pub fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| data(dir.display(), e))?;
    }
    fs::write(path, bytes).map_err(|e| data(path.display(), e))
}

/// Same stem with an image extension, if such a file exists.
pub fn sibling_image(path: &Path) -> Option<PathBuf> {
    ["png", "jpg", "jpeg", "PNG", "JPG", "JPEG"]
        .iter()
        .map(|ext| path.with_extension(ext))
        .find(|p| p.is_file())
}

/// Relative path rendered with `/` separators and no extension.
pub fn id_of(rel: &Path) -> String {
    rel.with_extension("")
        .components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("/")
}
