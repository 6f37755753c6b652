use plate_toolkit::seqdecode::{decode_fixture, GenerationConfig};

use crate::args::{DecodeArgs, Global};
use crate::error::{data, CliError};
use crate::files;

pub fn run(_g: &Global, a: &DecodeArgs) -> Result<(), CliError> {
    let mut config = GenerationConfig::default();
    if let Some(v) = a.num_beams {
        config.num_beams = v;
    }
    if let Some(v) = a.max_length {
        config.max_length = v;
    }
    if let Some(v) = a.length_penalty {
        config.length_penalty = v;
    }
    if let Some(v) = a.no_repeat_ngram {
        config.no_repeat_ngram_size = v;
    }
    if let Some(v) = a.early_stopping {
        config.early_stopping = v;
    }
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;

    let decoded = decode_fixture(&a.fixture, &a.vocab, &config).map_err(|e| data("decode", e))?;
    let text: String = decoded.iter().map(|d| format!("{}\t{}\n", d.sample_id, d.transcript)).collect();
    match &a.out {
        Some(path) => files::write(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
