//! Two-stage adaptive training controller.
//!
//! The controller is a pure state machine. [`next_plan`] says how to run the
//! next epoch, [`observe`] folds in that epoch's validation mAP, and
//! [`stage_transition`] picks the fine-tuning branch once stage 1 is done.
//! Nothing here trains a model; see [`session`] for the driver loop and
//! [`protocol`] for the line-oriented JSON wire format.
//!
//! Stage 1 runs for at most `stage1_epochs` with progressive unfreezing and
//! ends early on window convergence or patience exhaustion. If the best
//! stage-1 mAP beats `branch_map_threshold`, stage 2 fine-tunes fully
//! unfrozen with the conservative rate profile for `stage2_converged_epochs`;
//! otherwise it keeps a light freeze with the moderate profile for
//! `stage2_fallback_epochs`. Stage 2 anneals the rate on a cosine curve and
//! may stop early on its own patience counter.

pub mod protocol;
pub mod session;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::augment::{stage1_preset, stage2_preset, AugmentationPhasePreset};

pub use session::{run_session, Session, SessionFailure, SessionTrace, TraceEntry, Trainer};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SchedError {
    #[error("invalid scheduler config: {0}")]
    Config(String),
    #[error("session already stopped")]
    Stopped,
    #[error("stage 1 has finished; call stage_transition before the next plan")]
    TransitionDue,
    #[error("stage 1 is still running")]
    Stage1Running,
    #[error("report for epoch {found} arrived, expected epoch {expected}")]
    OutOfOrder { expected: u32, found: u32 },
    #[error("invalid report for epoch {epoch}: {reason}")]
    InvalidReport { epoch: u32, reason: String },
    #[error("trainer failed: {0}")]
    Trainer(String),
    #[error("protocol error on line {line}: {reason}")]
    Protocol { line: usize, reason: String },
    #[error("trace line {line}: {reason}")]
    Replay { line: usize, reason: String },
    #[error("I/O: {0}")]
    Io(String),
}

/// Rate, momentum and weight decay for one regime. Stage 2 anneals from
/// `base_lr` down to `lr_min`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrProfile {
    pub base_lr: f64,
    pub lr_min: f64,
    pub momentum: f64,
    pub weight_decay: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrProfiles {
    pub aggressive: LrProfile,
    pub conservative: LrProfile,
    pub moderate: LrProfile,
}

impl Default for LrProfiles {
    fn default() -> Self {
        Self {
            aggressive: LrProfile {
                base_lr: 1e-2,
                lr_min: 1e-4,
                momentum: 0.95,
                weight_decay: 1e-3,
            },
            conservative: LrProfile {
                base_lr: 1e-3,
                lr_min: 1e-5,
                momentum: 0.9,
                weight_decay: 5e-4,
            },
            moderate: LrProfile {
                base_lr: 5e-3,
                lr_min: 5e-5,
                momentum: 0.937,
                weight_decay: 5e-4,
            },
        }
    }
}

/// Gains for the box, class and distribution-focal loss terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    #[serde(rename = "box")]
    pub box_: f64,
    pub cls: f64,
    pub dfl: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            box_: 7.5,
            cls: 0.5,
            dfl: 1.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SchedulerConfig {
    pub stage1_epochs: u32,
    pub batch_size: u32,
    pub window: u32,
    pub convergence_threshold: f64,
    pub patience: u32,
    pub branch_map_threshold: f64,
    pub stage2_converged_epochs: u32,
    pub stage2_fallback_epochs: u32,
    /// Frozen layer counts for equal slices of stage 1, in order.
    pub unfreeze_schedule: Vec<u32>,
    pub lr_profiles: LrProfiles,
    pub loss_weights: LossWeights,
    /// Frozen layers kept throughout the fallback branch.
    pub light_freeze: u32,
    pub stage2_patience: u32,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        Self {
            stage1_epochs: 35,
            batch_size: 10,
            window: 8,
            convergence_threshold: 0.001,
            patience: 15,
            branch_map_threshold: 0.7,
            stage2_converged_epochs: 45,
            stage2_fallback_epochs: 55,
            unfreeze_schedule: vec![12, 8, 4],
            lr_profiles: LrProfiles::default(),
            loss_weights: LossWeights::default(),
            light_freeze: 4,
            stage2_patience: 15,
        }
    }
}

impl SchedulerConfig {
    pub fn validate(&self) -> Result<(), SchedError> {
        let bad = |m: &str| Err(SchedError::Config(m.to_string()));
        let counts = [
            self.stage1_epochs,
            self.batch_size,
            self.window,
            self.patience,
            self.stage2_converged_epochs,
            self.stage2_fallback_epochs,
            self.stage2_patience,
        ];
        if counts.contains(&0) {
            return bad("epoch counts, window, patience and batch size must be positive");
        }
        if self.window > self.stage1_epochs {
            return bad("window must not exceed stage1_epochs");
        }
        if self.patience < self.window {
            return bad("patience must be at least the window");
        }
        if !(self.convergence_threshold >= 0.0 && self.convergence_threshold.is_finite()) {
            return bad("convergence_threshold must be a non-negative number");
        }
        if !(0.0..=1.0).contains(&self.branch_map_threshold) {
            return bad("branch_map_threshold must lie in [0, 1]");
        }
        if self.unfreeze_schedule.is_empty() {
            return bad("unfreeze_schedule must not be empty");
        }
        if self.unfreeze_schedule.windows(2).any(|w| w[1] > w[0]) {
            return bad("unfreeze_schedule must be non-increasing");
        }
        if self.unfreeze_schedule.len() as u32 > self.stage1_epochs {
            return bad("unfreeze_schedule has more phases than stage-1 epochs");
        }
        let p = &self.lr_profiles;
        for (name, prof) in [
            ("aggressive", p.aggressive),
            ("conservative", p.conservative),
            ("moderate", p.moderate),
        ] {
            if !(prof.lr_min > 0.0 && prof.base_lr >= prof.lr_min && prof.base_lr.is_finite()) {
                return Err(SchedError::Config(format!(
                    "{name} profile needs 0 < lr_min <= base_lr"
                )));
            }
        }
        let w = &self.loss_weights;
        if ![w.box_, w.cls, w.dfl].iter().all(|v| *v > 0.0 && v.is_finite()) {
            return bad("loss weights must be positive");
        }
        Ok(())
    }

    /// Sets one field from `key=value`, where `key` may be a dotted path
    /// such as `lr_profiles.moderate.base_lr` and `value` is JSON (bare
    /// numbers work as is).
    pub fn apply_override(&mut self, assignment: &str) -> Result<(), SchedError> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| SchedError::Config(format!("override `{assignment}` is not key=value")))?;
        let value: serde_json::Value = serde_json::from_str(raw.trim())
            .map_err(|_| SchedError::Config(format!("override value `{}` is not valid JSON", raw.trim())))?;
        let mut tree = serde_json::to_value(&*self).expect("config serializes");
        let mut slot = &mut tree;
        for part in key.trim().split('.') {
            slot = slot
                .get_mut(part)
                .ok_or_else(|| SchedError::Config(format!("unknown config key `{}`", key.trim())))?;
        }
        *slot = value;
        let updated: SchedulerConfig =
            serde_json::from_value(tree).map_err(|e| SchedError::Config(format!("override `{assignment}`: {e}")))?;
        updated.validate()?;
        *self = updated;
        Ok(())
    }

    /// Stage-1 epochs per unfreezing phase (rounded up).
    pub fn phase_length(&self) -> u32 {
        self.stage1_epochs.div_ceil(self.unfreeze_schedule.len() as u32)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Stage1,
    Stage2Converged,
    Stage2Fallback,
    Stopped,
}

/// Why a stage ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageEnd {
    Budget,
    Converged,
    EarlyStop,
}

/// How to run one epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochPlan {
    pub global_epoch: u32,
    pub stage: u8,
    pub frozen_layers: u32,
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub loss_weights: LossWeights,
    pub preset: AugmentationPhasePreset,
    pub batch_size: u32,
}

/// Validation result for one epoch. `wall_time_s` is optional on the wire.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub global_epoch: u32,
    pub map50: f64,
    pub val_loss: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
}

impl MetricReport {
    pub fn new(global_epoch: u32, map50: f64, val_loss: f64) -> Self {
        Self {
            global_epoch,
            map50,
            val_loss,
            wall_time_s: None,
        }
    }

    pub fn validate(&self) -> Result<(), SchedError> {
        let reason = if !(0.0..=1.0).contains(&self.map50) {
            format!("map50 {} outside [0, 1]", self.map50)
        } else if !(self.val_loss >= 0.0 && self.val_loss.is_finite()) {
            format!("val_loss {} must be a non-negative number", self.val_loss)
        } else if self.wall_time_s.is_some_and(|t| !(t >= 0.0 && t.is_finite())) {
            "wall_time_s must be a non-negative number".to_string()
        } else {
            return Ok(());
        };
        Err(SchedError::InvalidReport {
            epoch: self.global_epoch,
            reason,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchedulerState {
    pub phase: Phase,
    pub history: Vec<MetricReport>,
    /// Maximum mAP over the whole history (0 before any report).
    pub best_map: f64,
    pub best_epoch: Option<u32>,
    /// Stage-1 reports since the last strict improvement of `best_map`.
    pub epochs_since_best: u32,
    pub converged: bool,
    pub stage1_end: Option<StageEnd>,
    /// Stage-2 branch, once chosen. Survives the move to `Stopped`.
    pub branch: Option<Phase>,
    /// First global epoch of stage 2, once entered.
    pub stage2_start: Option<u32>,
    pub stage2_best: Option<f64>,
    pub stage2_since_best: u32,
    pub stage2_end: Option<StageEnd>,
}

impl Default for SchedulerState {
    fn default() -> Self {
        Self::new()
    }
}

impl SchedulerState {
    pub fn new() -> Self {
        Self {
            phase: Phase::Stage1,
            history: Vec::new(),
            best_map: 0.0,
            best_epoch: None,
            epochs_since_best: 0,
            converged: false,
            stage1_end: None,
            branch: None,
            stage2_start: None,
            stage2_best: None,
            stage2_since_best: 0,
            stage2_end: None,
        }
    }

    pub fn next_epoch(&self) -> u32 {
        self.history.len() as u32
    }

    pub fn stage1_reports(&self) -> &[MetricReport] {
        let n = self.stage2_start.map_or(self.history.len(), |s| s as usize);
        &self.history[..n]
    }

    pub fn stage2_reports(&self) -> &[MetricReport] {
        self.stage2_start
            .map_or(&[][..], |s| &self.history[s as usize..])
    }

    /// Stage 1 has ended and the branch has not been chosen yet.
    pub fn transition_due(&self) -> bool {
        self.phase == Phase::Stage1 && self.stage1_end.is_some()
    }
}

/// Windowed mean improvement: mean of the last `window` values minus the
/// mean of the `window` before them. `None` until `2·window` values exist.
pub fn window_delta(maps: &[f64], window: usize) -> Option<f64> {
    if window == 0 || maps.len() < 2 * window {
        return None;
    }
    let n = maps.len();
    let last: f64 = maps[n - window..].iter().sum();
    let prev: f64 = maps[n - 2 * window..n - window].iter().sum();
    Some((last - prev) / window as f64)
}

/// `lr_min + ½(lr_max − lr_min)(1 + cos(π·t/T))`; a zero-length schedule
/// stays at `lr_max`.
pub fn cosine_lr(lr_max: f64, lr_min: f64, t: u32, t_max: u32) -> f64 {
    if t_max == 0 {
        return lr_max;
    }
    let t = t.min(t_max);
    lr_min + 0.5 * (lr_max - lr_min) * (1.0 + (PI * t as f64 / t_max as f64).cos())
}

/// Frozen layers for a stage-1 epoch.
pub fn stage1_frozen_layers(epoch: u32, config: &SchedulerConfig) -> u32 {
    let idx = (epoch / config.phase_length()) as usize;
    let sched = &config.unfreeze_schedule;
    sched[idx.min(sched.len() - 1)]
}

/// Plan for the next expected epoch.
pub fn next_plan(state: &SchedulerState, config: &SchedulerConfig) -> Result<EpochPlan, SchedError> {
    let epoch = state.next_epoch();
    let (stage, frozen, lr, profile, preset) = match state.phase {
        Phase::Stopped => return Err(SchedError::Stopped),
        Phase::Stage1 if state.stage1_end.is_some() => return Err(SchedError::TransitionDue),
        Phase::Stage1 => {
            let prof = config.lr_profiles.aggressive;
            (1, stage1_frozen_layers(epoch, config), prof.base_lr, prof, stage1_preset())
        }
        Phase::Stage2Converged | Phase::Stage2Fallback => {
            let converged = state.phase == Phase::Stage2Converged;
            let (prof, budget, frozen) = if converged {
                (config.lr_profiles.conservative, config.stage2_converged_epochs, 0)
            } else {
                (config.lr_profiles.moderate, config.stage2_fallback_epochs, config.light_freeze)
            };
            let t = epoch - state.stage2_start.expect("stage 2 records its start");
            let lr = cosine_lr(prof.base_lr, prof.lr_min, t, budget - 1);
            (2, frozen, lr, prof, stage2_preset())
        }
    };
    Ok(EpochPlan {
        global_epoch: epoch,
        stage,
        frozen_layers: frozen,
        learning_rate: lr,
        momentum: profile.momentum,
        weight_decay: profile.weight_decay,
        loss_weights: config.loss_weights,
        preset,
        batch_size: config.batch_size,
    })
}

/// Folds one report into the state.
pub fn observe(
    state: &SchedulerState,
    report: &MetricReport,
    config: &SchedulerConfig,
) -> Result<SchedulerState, SchedError> {
    match state.phase {
        Phase::Stopped => return Err(SchedError::Stopped),
        Phase::Stage1 if state.stage1_end.is_some() => return Err(SchedError::TransitionDue),
        _ => {}
    }
    let expected = state.next_epoch();
    if report.global_epoch != expected {
        return Err(SchedError::OutOfOrder {
            expected,
            found: report.global_epoch,
        });
    }
    report.validate()?;

    let mut next = state.clone();
    next.history.push(report.clone());
    let improved = next.best_epoch.is_none() || report.map50 > next.best_map;
    if improved {
        next.best_map = report.map50;
        next.best_epoch = Some(report.global_epoch);
    }

    if next.phase == Phase::Stage1 {
        next.epochs_since_best = if improved { 0 } else { next.epochs_since_best + 1 };
        let maps: Vec<f64> = next.history.iter().map(|r| r.map50).collect();
        if let Some(delta) = window_delta(&maps, config.window as usize) {
            next.converged = delta < config.convergence_threshold;
        }
        next.stage1_end = if next.epochs_since_best >= config.patience {
            Some(StageEnd::EarlyStop)
        } else if next.converged {
            Some(StageEnd::Converged)
        } else if next.history.len() as u32 >= config.stage1_epochs {
            Some(StageEnd::Budget)
        } else {
            None
        };
        return Ok(next);
    }

    // Stage 2: local best and patience, then the epoch budget.
    match next.stage2_best {
        Some(b) if report.map50 <= b => next.stage2_since_best += 1,
        _ => {
            next.stage2_best = Some(report.map50);
            next.stage2_since_best = 0;
        }
    }
    let budget = if next.phase == Phase::Stage2Converged {
        config.stage2_converged_epochs
    } else {
        config.stage2_fallback_epochs
    };
    let done = next.stage2_reports().len() as u32;
    let end = if done >= budget {
        Some(StageEnd::Budget)
    } else if next.stage2_since_best >= config.stage2_patience {
        Some(StageEnd::EarlyStop)
    } else {
        None
    };
    if end.is_some() {
        next.stage2_end = end;
        next.phase = Phase::Stopped;
    }
    Ok(next)
}

/// Enters the stage-2 branch chosen by the best stage-1 mAP.
pub fn stage_transition(state: &SchedulerState, config: &SchedulerConfig) -> Result<SchedulerState, SchedError> {
    match state.phase {
        Phase::Stopped => return Err(SchedError::Stopped),
        Phase::Stage1 if state.stage1_end.is_none() => return Err(SchedError::Stage1Running),
        Phase::Stage1 => {}
        _ => return Err(SchedError::Config("stage transition already happened".into())),
    }
    let mut next = state.clone();
    next.phase = if state.best_map > config.branch_map_threshold {
        Phase::Stage2Converged
    } else {
        Phase::Stage2Fallback
    };
    next.branch = Some(next.phase);
    next.stage2_start = Some(state.next_epoch());
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn feed(maps: &[f64], config: &SchedulerConfig) -> SchedulerState {
        let mut st = SchedulerState::new();
        for (i, &m) in maps.iter().enumerate() {
            st = observe(&st, &MetricReport::new(i as u32, m, 1.0), config).unwrap();
        }
        st
    }

    #[test]
    fn defaults_validate() {
        SchedulerConfig::default().validate().unwrap();
        assert_eq!(SchedulerConfig::default().phase_length(), 12);
    }

    #[test]
    fn frozen_layers_follow_thirds() {
        let c = SchedulerConfig::default();
        let st = SchedulerState::new();
        assert_eq!(next_plan(&st, &c).unwrap().frozen_layers, 12);
        let got: Vec<u32> = [0, 11, 12, 23, 24, 30, 34].iter().map(|&e| stage1_frozen_layers(e, &c)).collect();
        assert_eq!(got, vec![12, 12, 8, 8, 4, 4, 4]);
    }

    #[test]
    fn flat_reports_converge() {
        let c = SchedulerConfig::default();
        let st = feed(&[0.5; 15], &c);
        assert!(!st.converged);
        let st = feed(&[0.5; 16], &c);
        assert!(st.converged);
    }

    #[test]
    fn rising_reports_do_not_converge() {
        let c = SchedulerConfig::default();
        let maps: Vec<f64> = (0..20).map(|i| 0.1 + 0.01 * i as f64).collect();
        let st = feed(&maps, &c);
        assert!(!st.converged);
        assert!(st.stage1_end.is_none());
    }

    #[test]
    fn patience_stops_stage1() {
        let c = SchedulerConfig::default();
        let mut maps = vec![0.1, 0.2, 0.3, 0.4];
        maps.extend([0.4; 14]);
        let st = feed(&maps, &c);
        assert_eq!(st.stage1_end, None);
        maps.push(0.4);
        let st = feed(&maps, &c);
        assert_eq!(st.history.last().unwrap().global_epoch, 18);
        assert_eq!(st.stage1_end, Some(StageEnd::EarlyStop));
        assert_eq!(next_plan(&st, &c), Err(SchedError::TransitionDue));
    }

    #[test]
    fn out_of_order_rejected() {
        let c = SchedulerConfig::default();
        let st = SchedulerState::new();
        assert_eq!(
            observe(&st, &MetricReport::new(1, 0.2, 1.0), &c),
            Err(SchedError::OutOfOrder { expected: 0, found: 1 })
        );
        assert!(matches!(
            observe(&st, &MetricReport::new(0, 1.2, 1.0), &c),
            Err(SchedError::InvalidReport { .. })
        ));
    }

    #[test]
    fn branch_is_strict() {
        let c = SchedulerConfig::default();
        for (best, phase) in [
            (0.75, Phase::Stage2Converged),
            (0.60, Phase::Stage2Fallback),
            (0.70, Phase::Stage2Fallback),
        ] {
            let st = feed(&[best; 16], &c);
            assert!(st.transition_due());
            let st2 = stage_transition(&st, &c).unwrap();
            assert_eq!(st2.phase, phase);
        }
        assert_eq!(
            stage_transition(&SchedulerState::new(), &c),
            Err(SchedError::Stage1Running)
        );
    }

    #[test]
    fn cosine_endpoints() {
        assert_eq!(cosine_lr(1e-3, 1e-5, 0, 44), 1e-3);
        assert_eq!(cosine_lr(1e-3, 1e-5, 44, 44), 1e-5);
        let mid = cosine_lr(1.0, 0.0, 22, 44);
        assert!((mid - 0.5).abs() < 1e-12);
    }

    #[test]
    fn overrides_by_path() {
        let mut c = SchedulerConfig::default();
        c.apply_override("stage1_epochs=40").unwrap();
        c.apply_override("lr_profiles.moderate.base_lr = 0.004").unwrap();
        assert_eq!(c.stage1_epochs, 40);
        assert_eq!(c.lr_profiles.moderate.base_lr, 0.004);
        assert!(c.apply_override("nope=1").is_err());
        assert!(c.apply_override("window=100").is_err());
        assert_eq!(c.window, 8);
    }
}
