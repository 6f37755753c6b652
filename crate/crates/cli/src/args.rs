use std::path::PathBuf;

use clap::{value_parser, ArgAction, Args, Parser, Subcommand, ValueEnum};
use plate_toolkit::simharness::TableFormat;

#[derive(Debug, Parser)]
#[command(name = "alpr", version, about = "License plate pipeline tooling: annotations, augmentation, scheduling, decoding, evaluation")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Directory for generated files.
    #[arg(long, global = true, env = "ALPR_OUTPUT_DIR", default_value = "alpr-out")]
    pub output_dir: PathBuf,
    /// Report format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// More diagnostics on stderr (repeatable).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Csv,
}

impl From<Format> for TableFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Text => TableFormat::Text,
            Format::Csv => TableFormat::Csv,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert annotations between Pascal VOC, YOLO and binary masks.
    Convert(ConvertArgs),
    /// Write augmented image/label pairs from a YOLO-labelled dataset.
    Augment(AugmentArgs),
    /// Score detections against VOC ground truth.
    EvalDet(EvalDetArgs),
    /// Score OCR transcripts (CER, WER, edit distance).
    EvalOcr(EvalOcrArgs),
    /// Beam-search decode a logit fixture.
    Decode(DecodeArgs),
    /// Run the two-stage training scheduler.
    Schedule(ScheduleArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InFormat {
    Voc,
    Yolo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutFormat {
    Voc,
    Yolo,
    Mask,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    #[arg(long = "from", value_enum)]
    pub from: InFormat,
    #[arg(long = "to", value_enum)]
    pub to: OutFormat,
    /// Class names, one per line; fixes class ids and names.
    #[arg(long)]
    pub classes: Option<PathBuf>,
    /// Image size `WxH` for YOLO labels without a sibling image.
    #[arg(long, value_parser = parse_size)]
    pub size: Option<(u32, u32)>,
    /// Annotation files or directories (searched recursively).
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
}

fn parse_size(s: &str) -> Result<(u32, u32), String> {
    let (w, h) = s.split_once(['x', 'X']).ok_or("expected WxH")?;
    let w: u32 = w.parse().map_err(|_| format!("bad width `{w}`"))?;
    let h: u32 = h.parse().map_err(|_| format!("bad height `{h}`"))?;
    if w == 0 || h == 0 {
        return Err("size must be positive".into());
    }
    Ok((w, h))
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    /// Directory of images (png/jpg) with same-stem YOLO `.txt` labels.
    pub dataset: PathBuf,
    /// Training stage whose preset to use.
    #[arg(long, value_parser = value_parser!(u8).range(1..=2))]
    pub stage: u8,
    /// Number of augmented pairs to write.
    #[arg(long, default_value_t = 1, value_parser = value_parser!(u32).range(1..))]
    pub count: u32,
    /// `key = value` file overriding preset fields.
    #[arg(long)]
    pub preset_overrides: Option<PathBuf>,
    /// Draw the mix-up weight from Beta(alpha, alpha) instead of using 0.5.
    #[arg(long)]
    pub mixup_beta: Option<f64>,
    /// Mosaic split-point jitter as a fraction of the image size.
    #[arg(long, default_value_t = 0.5)]
    pub mosaic_jitter: f64,
}

#[derive(Debug, Args)]
pub struct EvalDetArgs {
    /// Lines of `image_id class confidence x_min y_min x_max y_max`.
    #[arg(long)]
    pub predictions: PathBuf,
    /// VOC file or directory; an image id is the XML path relative to it,
    /// without extension.
    #[arg(long)]
    pub ground_truth: PathBuf,
    #[arg(long, default_value_t = plate_toolkit::detmetrics::DEFAULT_IOU_THRESHOLD)]
    pub iou_threshold: f64,
    #[arg(long, default_value_t = 0.0)]
    pub min_confidence: f64,
    /// Row label in the report.
    #[arg(long, default_value = "model")]
    pub label: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Unit {
    Scalar,
    Grapheme,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Aggregation {
    Micro,
    Macro,
}

#[derive(Debug, Args)]
pub struct EvalOcrArgs {
    /// TSV of `image_id<TAB>prediction<TAB>ground_truth`.
    pub pairs: PathBuf,
    #[arg(long, value_enum, default_value_t = Unit::Scalar)]
    pub unit: Unit,
    #[arg(long, value_enum, default_value_t = Aggregation::Micro)]
    pub aggregation: Aggregation,
    /// Column label in the report.
    #[arg(long, default_value = "Value")]
    pub label: String,
}

#[derive(Debug, Args)]
pub struct DecodeArgs {
    /// Logit fixture (`sample<TAB>prefix<TAB>row` lines).
    #[arg(long)]
    pub fixture: PathBuf,
    /// Vocabulary (`id<TAB>token` lines).
    #[arg(long)]
    pub vocab: PathBuf,
    #[arg(long)]
    pub num_beams: Option<usize>,
    #[arg(long)]
    pub max_length: Option<usize>,
    #[arg(long)]
    pub length_penalty: Option<f64>,
    #[arg(long = "no-repeat-ngram")]
    pub no_repeat_ngram: Option<usize>,
    #[arg(long, action = ArgAction::Set)]
    pub early_stopping: Option<bool>,
    /// Write transcripts here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["scenarios", "live", "bridge"]))]
pub struct ScheduleArgs {
    /// Scenario file of simulated trajectories.
    #[arg(long)]
    pub scenarios: Option<PathBuf>,
    /// Speak the plan/report protocol over stdin/stdout.
    #[arg(long)]
    pub live: bool,
    /// Shell command of a trainer bridge to drive over its stdin/stdout.
    #[arg(long)]
    pub bridge: Option<String>,
    /// Continue from a recorded trace.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Config override `key=value` (dotted keys for nested fields).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Trace destination for a single session (default: output dir).
    #[arg(long)]
    pub trace: Option<PathBuf>,
}
