//! Non-neural tooling for a two-stage license plate recognition pipeline:
//! annotation conversion, phase-aware augmentation, an adaptive training
//! scheduler, beam-search decoding and detection/OCR evaluation.

pub mod annot;
pub mod augment;
pub mod detmetrics;
pub mod scheduler;
pub mod seqdecode;
pub mod simharness;
pub mod textmetrics;
