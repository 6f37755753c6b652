//! Scheduler sessions against simulated, stdio or subprocess trainers.
//!
//! Traces are NDJSON, one `{plan, report}` object per epoch, appended as
//! each epoch completes so an interrupted run can be resumed.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

use plate_toolkit::scheduler::protocol::{read_trace, write_trace_entry, StreamTrainer};
use plate_toolkit::scheduler::{SchedulerConfig, Session, SessionTrace, Trainer};
use plate_toolkit::simharness::{mock_trainer, parse_scenarios, run_scenarios, summarize, summary_table};

use crate::args::{Global, ScheduleArgs};
use crate::error::{data, CliError};
use crate::files;

pub fn run(g: &Global, a: &ScheduleArgs) -> Result<(), CliError> {
    let mut config = SchedulerConfig::default();
    for o in &a.overrides {
        config.apply_override(o).map_err(|e| CliError::Usage(e.to_string()))?;
    }
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;

    if let Some(path) = &a.scenarios {
        return run_scenario_file(g, a, path, config);
    }
    let (name, trace) = if a.live {
        let stdin = std::io::stdin().lock();
        let stdout = std::io::stdout().lock();
        let mut trainer = StreamTrainer::new(stdin, stdout);
        ("live", drive(g, a, "live", &config, &mut trainer)?)
    } else {
        let cmd = a.bridge.as_deref().expect("argument group requires a source");
        ("bridge", run_bridge(g, a, cmd, &config)?)
    };
    // Standard output may carry the protocol, so the summary goes to stderr.
    let table = summary_table(&[summarize(name, &trace)], g.format.into());
    if a.live {
        eprint!("{table}");
    } else {
        print!("{table}");
    }
    Ok(())
}

fn run_scenario_file(g: &Global, a: &ScheduleArgs, path: &Path, config: SchedulerConfig) -> Result<(), CliError> {
    let specs = parse_scenarios(&files::read(path)?).map_err(|e| data(path.display(), e))?;
    if (a.resume.is_some() || a.trace.is_some()) && specs.len() != 1 {
        return Err(CliError::Usage(format!(
            "--resume and --trace need a scenario file with exactly one scenario, found {}",
            specs.len()
        )));
    }
    let summaries = if a.resume.is_some() {
        let spec = &specs[0];
        let mut trainer = mock_trainer(spec.clone()).map_err(|e| data(path.display(), e))?;
        let trace = drive(g, a, &spec.name, &config, &mut trainer)?;
        vec![summarize(&spec.name, &trace)]
    } else {
        let results = run_scenarios(&specs, &config).map_err(|e| data(path.display(), e))?;
        for r in &results {
            let target = trace_path(g, a, &r.spec.name);
            let mut out = create(&target)?;
            for e in &r.trace.entries {
                write_trace_entry(&mut out, e).map_err(|e| data(target.display(), e))?;
            }
            out.flush().map_err(|e| data(target.display(), e))?;
        }
        results.iter().map(|r| r.summary()).collect()
    };
    print!("{}", summary_table(&summaries, g.format.into()));
    Ok(())
}

fn run_bridge(g: &Global, a: &ScheduleArgs, cmd: &str, config: &SchedulerConfig) -> Result<SessionTrace, CliError> {
    let mut child = Command::new("sh")
        .arg("-c")
        .arg(cmd)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .map_err(|e| data(format!("spawning `{cmd}`"), e))?;
    let stdin = child.stdin.take().expect("piped stdin");
    let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
    let mut trainer = StreamTrainer::new(stdout, stdin);
    let result = drive(g, a, "bridge", config, &mut trainer);
    // Closing its input tells the bridge the session is over.
    drop(trainer);
    let status = child.wait().map_err(|e| data("bridge", e))?;
    let trace = result?;
    if !status.success() {
        eprintln!("warning: bridge exited with {status}");
    }
    Ok(trace)
}

fn trace_path(g: &Global, a: &ScheduleArgs, name: &str) -> PathBuf {
    a.trace.clone().unwrap_or_else(|| g.output_dir.join(format!("{name}.ndjson")))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| data(dir.display(), e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| data(path.display(), e))
}

/// Runs one session to completion, appending each finished epoch to the
/// trace file. With `--resume` the recorded epochs are replayed first and
/// copied to the new trace.
fn drive<T: Trainer + ?Sized>(
    g: &Global,
    a: &ScheduleArgs,
    name: &str,
    config: &SchedulerConfig,
    trainer: &mut T,
) -> Result<SessionTrace, CliError> {
    let mut session = match &a.resume {
        Some(p) => {
            let file = File::open(p).map_err(|e| data(p.display(), e))?;
            let entries = read_trace(BufReader::new(file)).map_err(|e| data(p.display(), e))?;
            Session::resume(config.clone(), entries).map_err(|e| data(p.display(), e))?
        }
        None => Session::new(config.clone()).map_err(|e| CliError::Usage(e.to_string()))?,
    };
    let target = trace_path(g, a, name);
    // The resumed trace may be the target itself; it has been read already.
    let mut out = create(&target)?;
    let io = |e| data(target.display(), e);
    for e in session.entries() {
        write_trace_entry(&mut out, e).map_err(io)?;
    }
    out.flush().map_err(|e| data(target.display(), e))?;
    loop {
        match session.step(trainer) {
            Ok(Some(entry)) => {
                write_trace_entry(&mut out, entry).map_err(io)?;
                out.flush().map_err(|e| data(target.display(), e))?;
            }
            Ok(None) => break,
            Err(e) => {
                return Err(CliError::Data(format!(
                    "session stopped after {} epochs (trace kept in {}): {e}",
                    session.entries().len(),
                    target.display()
                )))
            }
        }
    }
    if g.verbose > 0 {
        eprintln!("{name}: {} epochs, trace in {}", session.entries().len(), target.display());
    }
    Ok(session.trace())
}
