//! Driver loop around the state machine plus the persisted trace.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{next_plan, observe, stage_transition, EpochPlan, MetricReport, Phase, SchedError, SchedulerConfig, SchedulerState};

/// Anything that can run one epoch and report on it.
pub trait Trainer {
    fn run_epoch(&mut self, plan: &EpochPlan) -> Result<MetricReport, SchedError>;
}

impl<F> Trainer for F
where
    F: FnMut(&EpochPlan) -> Result<MetricReport, SchedError>,
{
    fn run_epoch(&mut self, plan: &EpochPlan) -> Result<MetricReport, SchedError> {
        self(plan)
    }
}

/// One line of a session trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub plan: EpochPlan,
    pub report: MetricReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionTrace {
    pub entries: Vec<TraceEntry>,
    pub final_state: SchedulerState,
}

impl SessionTrace {
    pub fn stage_plan_count(&self, stage: u8) -> usize {
        self.entries.iter().filter(|e| e.plan.stage == stage).count()
    }

    pub fn last_stage1_epoch(&self) -> Option<u32> {
        self.entries
            .iter()
            .filter(|e| e.plan.stage == 1)
            .map(|e| e.plan.global_epoch)
            .next_back()
    }
}

/// A failed session together with everything recorded before the failure.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionFailure {
    pub error: SchedError,
    pub partial: Box<SessionTrace>,
}

/// Stateful wrapper that keeps the trace in step with the state machine.
#[derive(Debug, Clone)]
pub struct Session {
    config: SchedulerConfig,
    state: SchedulerState,
    entries: Vec<TraceEntry>,
}

impl Session {
    pub fn new(config: SchedulerConfig) -> Result<Self, SchedError> {
        config.validate()?;
        Ok(Self {
            config,
            state: SchedulerState::new(),
            entries: Vec::new(),
        })
    }

    /// Rebuilds a session from a recorded trace. Every recorded plan must be
    /// the plan this config would emit at that point.
    pub fn resume(config: SchedulerConfig, entries: Vec<TraceEntry>) -> Result<Self, SchedError> {
        let mut session = Self::new(config)?;
        for (i, entry) in entries.into_iter().enumerate() {
            let line = i + 1;
            let replay = |e: SchedError| SchedError::Replay {
                line,
                reason: e.to_string(),
            };
            let plan = session.prepare().map_err(replay)?.ok_or_else(|| SchedError::Replay {
                line,
                reason: "session had already stopped".into(),
            })?;
            if plan != entry.plan {
                return Err(SchedError::Replay {
                    line,
                    reason: format!("recorded plan for epoch {} differs from the replayed plan", entry.plan.global_epoch),
                });
            }
            session.record(plan, entry.report).map_err(replay)?;
        }
        Ok(session)
    }

    pub fn config(&self) -> &SchedulerConfig {
        &self.config
    }

    pub fn state(&self) -> &SchedulerState {
        &self.state
    }

    pub fn entries(&self) -> &[TraceEntry] {
        &self.entries
    }

    pub fn is_stopped(&self) -> bool {
        self.state.phase == Phase::Stopped
    }

    /// Performs a pending stage transition and returns the next plan, or
    /// `None` once stopped.
    pub fn prepare(&mut self) -> Result<Option<EpochPlan>, SchedError> {
        if self.is_stopped() {
            return Ok(None);
        }
        if self.state.transition_due() {
            self.state = stage_transition(&self.state, &self.config)?;
        }
        next_plan(&self.state, &self.config).map(Some)
    }

    fn record(&mut self, plan: EpochPlan, report: MetricReport) -> Result<&TraceEntry, SchedError> {
        self.state = observe(&self.state, &report, &self.config)?;
        self.entries.push(TraceEntry { plan, report });
        Ok(self.entries.last().expect("just pushed"))
    }

    /// Runs one epoch. Returns the new trace entry, or `None` once stopped.
    /// Reports without a wall time get the measured one.
    pub fn step<T: Trainer + ?Sized>(&mut self, trainer: &mut T) -> Result<Option<&TraceEntry>, SchedError> {
        let Some(plan) = self.prepare()? else {
            return Ok(None);
        };
        let started = Instant::now();
        let mut report = trainer.run_epoch(&plan)?;
        if report.wall_time_s.is_none() {
            report.wall_time_s = Some(started.elapsed().as_secs_f64());
        }
        self.record(plan, report).map(Some)
    }

    pub fn trace(&self) -> SessionTrace {
        SessionTrace {
            entries: self.entries.clone(),
            final_state: self.state.clone(),
        }
    }

    /// Steps until stopped.
    pub fn run<T: Trainer + ?Sized>(&mut self, trainer: &mut T) -> Result<SessionTrace, SessionFailure> {
        loop {
            match self.step(trainer) {
                Ok(Some(_)) => {}
                Ok(None) => return Ok(self.trace()),
                Err(error) => {
                    return Err(SessionFailure {
                        error,
                        partial: Box::new(self.trace()),
                    })
                }
            }
        }
    }
}

/// Runs a fresh session to completion.
pub fn run_session<T: Trainer + ?Sized>(trainer: &mut T, config: &SchedulerConfig) -> Result<SessionTrace, SessionFailure> {
    let mut session = Session::new(config.clone()).map_err(|error| SessionFailure {
        error,
        partial: Box::new(SessionTrace {
            entries: Vec::new(),
            final_state: SchedulerState::new(),
        }),
    })?;
    session.run(trainer)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant(value: f64) -> impl FnMut(&EpochPlan) -> Result<MetricReport, SchedError> {
        move |p: &EpochPlan| {
            let mut r = MetricReport::new(p.global_epoch, value, 0.5);
            r.wall_time_s = Some(1.0);
            Ok(r)
        }
    }

    #[test]
    fn constant_trainer_stops_by_patience_in_both_stages() {
        let trace = run_session(&mut constant(0.3), &SchedulerConfig::default()).unwrap();
        // Stage 1: no improvement after epoch 0, so it ends at epoch 15.
        assert_eq!(trace.last_stage1_epoch(), Some(15));
        assert_eq!(trace.final_state.stage2_start, Some(16));
        assert_eq!(trace.stage_plan_count(2), 16);
        assert!(trace.entries.iter().filter(|e| e.plan.stage == 2).all(|e| e.plan.frozen_layers == 4));
    }

    #[test]
    fn failure_keeps_partial_trace() {
        let mut calls = 0;
        let mut flaky = |p: &EpochPlan| {
            calls += 1;
            if calls > 3 {
                Err(SchedError::Trainer("gpu on fire".into()))
            } else {
                Ok(MetricReport::new(p.global_epoch, 0.1, 1.0))
            }
        };
        let err = run_session(&mut flaky, &SchedulerConfig::default()).unwrap_err();
        assert_eq!(err.partial.entries.len(), 3);
        assert_eq!(err.error, SchedError::Trainer("gpu on fire".into()));
    }

    #[test]
    fn resume_matches_uninterrupted() {
        let config = SchedulerConfig::default();
        let mut epoch_map = |p: &EpochPlan| {
            let mut r = MetricReport::new(p.global_epoch, (0.02 * p.global_epoch as f64).min(0.9), 0.3);
            r.wall_time_s = Some(2.0);
            Ok(r)
        };
        let full = run_session(&mut epoch_map, &config).unwrap();
        let mut resumed = Session::resume(config.clone(), full.entries[..20].to_vec()).unwrap();
        let rest = resumed.run(&mut epoch_map).unwrap();
        assert_eq!(rest, full);

        let mut tampered = full.entries[..5].to_vec();
        tampered[2].plan.learning_rate = 0.5;
        assert!(matches!(
            Session::resume(config, tampered),
            Err(SchedError::Replay { line: 3, .. })
        ));
    }
}
