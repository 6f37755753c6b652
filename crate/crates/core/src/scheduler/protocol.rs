//! Newline-delimited JSON wire format.
//!
//! The scheduler writes one [`EpochPlan`] object per line and expects one
//! [`MetricReport`] object per line in reply, with `global_epoch` echoed.
//! Unknown fields are ignored on read so either side can grow. Session
//! traces use the same encoding with `{"plan": .., "report": ..}` lines.

use std::io::{BufRead, Write};

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::session::{TraceEntry, Trainer};
use super::{EpochPlan, MetricReport, SchedError};

fn encode<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("protocol types serialize")
}

fn decode<T: DeserializeOwned>(line: &str, line_no: usize) -> Result<T, SchedError> {
    serde_json::from_str(line.trim()).map_err(|e| SchedError::Protocol {
        line: line_no,
        reason: e.to_string(),
    })
}

pub fn encode_plan(plan: &EpochPlan) -> String {
    encode(plan)
}

pub fn decode_plan(line: &str, line_no: usize) -> Result<EpochPlan, SchedError> {
    decode(line, line_no)
}

pub fn encode_report(report: &MetricReport) -> String {
    encode(report)
}

pub fn decode_report(line: &str, line_no: usize) -> Result<MetricReport, SchedError> {
    decode(line, line_no)
}

pub fn write_trace_entry<W: Write>(mut out: W, entry: &TraceEntry) -> Result<(), SchedError> {
    writeln!(out, "{}", encode(entry)).map_err(|e| SchedError::Io(e.to_string()))
}

/// Reads a trace, skipping blank lines.
pub fn read_trace<R: BufRead>(input: R) -> Result<Vec<TraceEntry>, SchedError> {
    let mut entries = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| SchedError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        entries.push(decode(&line, i + 1)?);
    }
    Ok(entries)
}

/// Trainer that forwards plans to a peer over a pair of byte streams.
pub struct StreamTrainer<R, W> {
    reader: R,
    writer: W,
    lines_read: usize,
}

impl<R: BufRead, W: Write> StreamTrainer<R, W> {
    pub fn new(reader: R, writer: W) -> Self {
        Self {
            reader,
            writer,
            lines_read: 0,
        }
    }

    pub fn into_inner(self) -> (R, W) {
        (self.reader, self.writer)
    }
}

impl<R: BufRead, W: Write> Trainer for StreamTrainer<R, W> {
    fn run_epoch(&mut self, plan: &EpochPlan) -> Result<MetricReport, SchedError> {
        let io = |e: std::io::Error| SchedError::Io(e.to_string());
        writeln!(self.writer, "{}", encode_plan(plan)).map_err(io)?;
        self.writer.flush().map_err(io)?;
        let mut line = String::new();
        loop {
            line.clear();
            let n = self.reader.read_line(&mut line).map_err(io)?;
            self.lines_read += 1;
            if n == 0 {
                return Err(SchedError::Protocol {
                    line: self.lines_read,
                    reason: format!("peer closed the stream before reporting epoch {}", plan.global_epoch),
                });
            }
            if !line.trim().is_empty() {
                break;
            }
        }
        let report = decode_report(&line, self.lines_read)?;
        if report.global_epoch != plan.global_epoch {
            return Err(SchedError::Protocol {
                line: self.lines_read,
                reason: format!(
                    "report for epoch {} answers the plan for epoch {}",
                    report.global_epoch, plan.global_epoch
                ),
            });
        }
        Ok(report)
    }
}

/// Peer side of the protocol: answers every plan on `input` with the
/// trainer's report until end of input. Plans must arrive with strictly
/// consecutive epochs starting at `first_epoch`.
pub fn serve<R: BufRead, W: Write, T: Trainer + ?Sized>(
    input: R,
    mut output: W,
    trainer: &mut T,
    first_epoch: u32,
) -> Result<usize, SchedError> {
    let mut expected = first_epoch;
    let mut served = 0;
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| SchedError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let plan = decode_plan(&line, i + 1)?;
        if plan.global_epoch != expected {
            return Err(SchedError::Protocol {
                line: i + 1,
                reason: format!("plan for epoch {} arrived, expected {expected}", plan.global_epoch),
            });
        }
        let report = trainer.run_epoch(&plan)?;
        writeln!(output, "{}", encode_report(&report))
            .and_then(|_| output.flush())
            .map_err(|e| SchedError::Io(e.to_string()))?;
        expected += 1;
        served += 1;
    }
    Ok(served)
}
