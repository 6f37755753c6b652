//! Simulated trainers and an experiment harness for the scheduler.
//!
//! A [`TrajectorySpec`] describes an mAP curve over global epochs. The
//! [`MockTrainer`] built from it answers plans without training anything, so
//! whole sessions run in microseconds and can be checked against the
//! branching rules by hand.
//!
//! Saturating curves get a ×1.02 boost on epochs whose planned learning
//! rate lies in [`LR_BAND`]. Every default profile sits inside the band, so
//! the boost only shows up when a config pushes a rate outside it; that is
//! what makes a broken plan observable in tests. All other kinds ignore the
//! plan entirely.

mod scenario;
mod table;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::augment::{stage1_preset, stage2_preset};
use crate::scheduler::{
    run_session, EpochPlan, MetricReport, Phase, SchedError, SchedulerConfig, SessionFailure, SessionTrace, StageEnd,
    Trainer,
};

pub use scenario::parse_scenarios;
pub use table::{parse_table_csv, render_table, Layout, MetricRow, TableFormat};

/// Learning rates the mock trainer treats as sensible.
pub const LR_BAND: (f64, f64) = (1e-5, 2e-2);
/// Multiplier applied to saturating curves inside [`LR_BAND`].
pub const LR_BOOST: f64 = 1.02;
/// Simulated duration of one epoch.
pub const SIMULATED_EPOCH_SECONDS: f64 = 60.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid trajectory: {0}")]
    Trajectory(String),
    #[error("scenario line {line}: {reason}")]
    Scenario { line: usize, reason: String },
    #[error("no scenarios given")]
    NoScenarios,
    #[error("scenario `{name}` failed after {epochs} epochs: {error}")]
    Session { name: String, epochs: usize, error: SchedError },
    #[error("row {row} has {found} values, layout needs {expected}")]
    ColumnMismatch { row: usize, expected: usize, found: usize },
    #[error("table: {0}")]
    Table(String),
    #[error("trace invalid: {0}")]
    Trace(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TrajectoryKind {
    /// `asymptote·(1 − e^(−rate·(t+1)))`.
    Saturating { asymptote: f64, rate: f64, noise: f64, seed: u64 },
    /// Linear ramp reaching `level` at epoch `at`, flat afterwards.
    Plateau { level: f64, at: u32 },
    /// `start + slope·t`.
    NoisyLinear { start: f64, slope: f64, noise: f64, seed: u64 },
    /// Exact values per epoch; the last one repeats.
    Scripted { values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: TrajectoryKind,
}

impl TrajectorySpec {
    pub fn new(name: impl Into<String>, kind: TrajectoryKind) -> Self {
        Self { name: name.into(), kind }
    }

    pub fn saturating(name: impl Into<String>, asymptote: f64, rate: f64) -> Self {
        Self::new(
            name,
            TrajectoryKind::Saturating {
                asymptote,
                rate,
                noise: 0.0,
                seed: 0,
            },
        )
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(SimError::Trajectory(format!("{}: {name} {v} outside [0, 1]", self.name)))
            }
        };
        let nonneg = |name: &str, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(SimError::Trajectory(format!("{}: {name} {v} must be non-negative", self.name)))
            }
        };
        match &self.kind {
            TrajectoryKind::Saturating { asymptote, rate, noise, .. } => {
                unit("asymptote", *asymptote)?;
                nonneg("rate", *rate)?;
                nonneg("noise", *noise)
            }
            TrajectoryKind::Plateau { level, .. } => unit("level", *level),
            TrajectoryKind::NoisyLinear { start, slope, noise, .. } => {
                unit("start", *start)?;
                if !slope.is_finite() {
                    return Err(SimError::Trajectory(format!("{}: slope must be finite", self.name)));
                }
                nonneg("noise", *noise)
            }
            TrajectoryKind::Scripted { values } => {
                if values.is_empty() {
                    return Err(SimError::Trajectory(format!("{}: scripted values are empty", self.name)));
                }
                values.iter().try_for_each(|v| unit("value", *v))
            }
        }
    }

    /// mAP reported for `epoch` when trained at `learning_rate`.
    pub fn map_at(&self, epoch: u32, learning_rate: f64) -> f64 {
        let t = epoch as f64;
        let raw = match &self.kind {
            TrajectoryKind::Saturating {
                asymptote,
                rate,
                noise,
                seed,
            } => {
                let base = asymptote * (1.0 - (-rate * (t + 1.0)).exp());
                let boost = if (LR_BAND.0..=LR_BAND.1).contains(&learning_rate) {
                    LR_BOOST
                } else {
                    1.0
                };
                base * boost + epoch_noise(*seed, epoch, *noise)
            }
            TrajectoryKind::Plateau { level, at } => {
                if epoch >= *at {
                    *level
                } else {
                    level * (t + 1.0) / (*at as f64 + 1.0)
                }
            }
            TrajectoryKind::NoisyLinear {
                start,
                slope,
                noise,
                seed,
            } => start + slope * t + epoch_noise(*seed, epoch, *noise),
            TrajectoryKind::Scripted { values } => values[(epoch as usize).min(values.len() - 1)],
        };
        raw.clamp(0.0, 1.0)
    }
}

/// Uniform noise in `±amplitude`, a pure function of `(seed, epoch)`.
fn epoch_noise(seed: u64, epoch: u32, amplitude: f64) -> f64 {
    if amplitude == 0.0 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64);
    (rng.random::<f64>() * 2.0 - 1.0) * amplitude
}

/// Trainer that replays a trajectory.
#[derive(Debug, Clone)]
pub struct MockTrainer {
    pub spec: TrajectorySpec,
    pub epoch_seconds: f64,
}

pub fn mock_trainer(spec: TrajectorySpec) -> Result<MockTrainer, SimError> {
    spec.validate()?;
    Ok(MockTrainer {
        spec,
        epoch_seconds: SIMULATED_EPOCH_SECONDS,
    })
}

impl Trainer for MockTrainer {
    fn run_epoch(&mut self, plan: &EpochPlan) -> Result<MetricReport, SchedError> {
        let map50 = self.spec.map_at(plan.global_epoch, plan.learning_rate);
        Ok(MetricReport {
            global_epoch: plan.global_epoch,
            map50,
            val_loss: 1.0 - map50,
            wall_time_s: Some(self.epoch_seconds),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioResult {
    pub spec: TrajectorySpec,
    pub trace: SessionTrace,
}

/// One line of the scenario summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSummary {
    pub name: String,
    /// Stage-2 branch taken, if stage 2 was reached.
    pub branch: Option<Phase>,
    pub stage1_end: Option<StageEnd>,
    pub stage1_epochs: usize,
    pub stage2_epochs: usize,
    pub total_epochs: usize,
    pub best_map: f64,
    pub wall_time_s: f64,
}

impl ScenarioResult {
    pub fn summary(&self) -> ScenarioSummary {
        summarize(&self.spec.name, &self.trace)
    }
}

/// Summary line for any finished (or partial) trace.
pub fn summarize(name: &str, trace: &SessionTrace) -> ScenarioSummary {
    let st = &trace.final_state;
    ScenarioSummary {
        name: name.to_string(),
        branch: st.branch,
        stage1_end: st.stage1_end,
        stage1_epochs: trace.stage_plan_count(1),
        stage2_epochs: trace.stage_plan_count(2),
        total_epochs: trace.entries.len(),
        best_map: st.best_map,
        wall_time_s: trace.entries.iter().filter_map(|e| e.report.wall_time_s).sum(),
    }
}

/// Runs every scenario in parallel; output order follows `specs`.
pub fn run_scenarios(specs: &[TrajectorySpec], config: &SchedulerConfig) -> Result<Vec<ScenarioResult>, SimError> {
    if specs.is_empty() {
        return Err(SimError::NoScenarios);
    }
    specs.iter().try_for_each(TrajectorySpec::validate)?;
    specs
        .par_iter()
        .map(|spec| {
            let mut trainer = mock_trainer(spec.clone())?;
            let trace = run_session(&mut trainer, config).map_err(|SessionFailure { error, partial }| SimError::Session {
                name: spec.name.clone(),
                epochs: partial.entries.len(),
                error,
            })?;
            Ok(ScenarioResult {
                spec: spec.clone(),
                trace,
            })
        })
        .collect()
}

fn phase_name(p: Option<Phase>) -> &'static str {
    match p {
        Some(Phase::Stage2Converged) => "converged",
        Some(Phase::Stage2Fallback) => "fallback",
        Some(Phase::Stage1) => "stage1",
        Some(Phase::Stopped) => "stopped",
        None => "-",
    }
}

fn end_name(e: Option<StageEnd>) -> &'static str {
    match e {
        Some(StageEnd::Budget) => "budget",
        Some(StageEnd::Converged) => "converged",
        Some(StageEnd::EarlyStop) => "early-stop",
        None => "-",
    }
}

/// Branch, epoch counts and best mAP per scenario.
pub fn summary_table(summaries: &[ScenarioSummary], format: TableFormat) -> String {
    let mut grid = vec![[
        "Scenario",
        "Branch",
        "Stage-1 End",
        "Stage-1 Epochs",
        "Stage-2 Epochs",
        "Total Epochs",
        "Best mAP",
    ]
    .map(String::from)
    .to_vec()];
    for s in summaries {
        grid.push(vec![
            s.name.clone(),
            phase_name(s.branch).to_string(),
            end_name(s.stage1_end).to_string(),
            s.stage1_epochs.to_string(),
            s.stage2_epochs.to_string(),
            s.total_epochs.to_string(),
            format!("{:.4}", s.best_map),
        ]);
    }
    match format {
        TableFormat::Text => table::align(&grid),
        TableFormat::Csv => table::to_csv(&grid),
    }
}

/// Checks a finished trace against every rule the scheduler promises.
pub fn validate_trace(trace: &SessionTrace, config: &SchedulerConfig) -> Result<(), SimError> {
    let fail = |m: String| Err(SimError::Trace(m));
    let st = &trace.final_state;
    let reports: Vec<&MetricReport> = trace.entries.iter().map(|e| &e.report).collect();
    if st.history.len() != reports.len() || st.history.iter().zip(&reports).any(|(a, b)| a != *b) {
        return fail("final history differs from the recorded reports".into());
    }
    for (i, e) in trace.entries.iter().enumerate() {
        if e.plan.global_epoch != i as u32 || e.report.global_epoch != i as u32 {
            return fail(format!("entry {i} is not epoch {i}"));
        }
        if !(0.0..=1.0).contains(&e.report.map50) {
            return fail(format!("epoch {i}: mAP outside [0, 1]"));
        }
    }
    let stages: Vec<u8> = trace.entries.iter().map(|e| e.plan.stage).collect();
    let switches = stages.windows(2).filter(|w| w[0] != w[1]).count();
    if switches > 1 || stages.first().is_some_and(|s| *s != 1) || stages.windows(2).any(|w| w[1] < w[0]) {
        return fail("stages must run 1 then 2 with one transition at most".into());
    }
    let best = reports.iter().map(|r| r.map50).fold(0.0, f64::max);
    if st.best_map != best {
        return fail(format!("best_map {} but history max is {best}", st.best_map));
    }

    let s1: Vec<_> = trace.entries.iter().filter(|e| e.plan.stage == 1).collect();
    let s2: Vec<_> = trace.entries.iter().filter(|e| e.plan.stage == 2).collect();
    if s1.len() > config.stage1_epochs as usize {
        return fail(format!("{} stage-1 plans exceed the budget", s1.len()));
    }
    if s1.windows(2).any(|w| w[1].plan.frozen_layers > w[0].plan.frozen_layers) {
        return fail("frozen layers increased during stage 1".into());
    }
    if s1.iter().any(|e| !config.unfreeze_schedule.contains(&e.plan.frozen_layers) || e.plan.preset != stage1_preset()) {
        return fail("stage-1 plan outside the unfreeze schedule or preset".into());
    }
    if let Some(first) = s2.first() {
        let s1_best = s1.iter().map(|e| e.report.map50).fold(0.0, f64::max);
        let converged = s1_best > config.branch_map_threshold;
        let (frozen, budget) = if converged {
            (0, config.stage2_converged_epochs)
        } else {
            (config.light_freeze, config.stage2_fallback_epochs)
        };
        let expected_branch = if converged { Phase::Stage2Converged } else { Phase::Stage2Fallback };
        if st.branch != Some(expected_branch) {
            return fail(format!("branch {:?} but stage-1 best {s1_best} implies {expected_branch:?}", st.branch));
        }
        if first.plan.frozen_layers != frozen || s2.iter().any(|e| e.plan.frozen_layers != frozen) {
            return fail(format!(
                "branch mismatch: stage-1 best {s1_best} implies {frozen} frozen layers in stage 2"
            ));
        }
        if s2.iter().any(|e| e.plan.preset != stage2_preset()) {
            return fail("stage-2 plan without the stage-2 preset".into());
        }
        if s2.windows(2).any(|w| w[1].plan.learning_rate > w[0].plan.learning_rate) {
            return fail("stage-2 learning rate increased".into());
        }
        let n = s2.len() as u32;
        let early = st.stage2_end == Some(StageEnd::EarlyStop);
        if n > budget || (!early && st.phase == Phase::Stopped && n != budget) {
            return fail(format!("{n} stage-2 plans for a budget of {budget}"));
        }
    }
    Ok(())
}
