//! End-to-end scheduler sessions driven by simulated trainers.

use plate_toolkit::scheduler::protocol::{read_trace, write_trace_entry};
use plate_toolkit::scheduler::{
    cosine_lr, observe, run_session, window_delta, MetricReport, Phase, SchedulerConfig, SchedulerState, Session,
    StageEnd,
};
use plate_toolkit::simharness::{
    mock_trainer, parse_scenarios, run_scenarios, summary_table, validate_trace, TableFormat, TrajectoryKind,
    TrajectorySpec,
};
use proptest::prelude::*;

fn run(spec: TrajectorySpec) -> plate_toolkit::scheduler::SessionTrace {
    let config = SchedulerConfig::default();
    let trace = run_session(&mut mock_trainer(spec).unwrap(), &config).unwrap();
    validate_trace(&trace, &config).unwrap();
    trace
}

#[test]
fn high_asymptote_takes_converged_branch() {
    let trace = run(TrajectorySpec::saturating("hi", 0.8, 0.15));
    assert_eq!(trace.final_state.branch, Some(Phase::Stage2Converged));
    assert_eq!(trace.stage_plan_count(2), 45);
    assert!(trace.stage_plan_count(1) <= 35);
    assert!(trace.entries.iter().filter(|e| e.plan.stage == 2).all(|e| e.plan.frozen_layers == 0));
    let last = trace.entries.last().unwrap();
    assert_eq!(last.plan.learning_rate, SchedulerConfig::default().lr_profiles.conservative.lr_min);
}

#[test]
fn low_asymptotes_take_fallback_branch() {
    for asymptote in [0.5, 0.3] {
        let trace = run(TrajectorySpec::saturating("lo", asymptote, 0.15));
        assert_eq!(trace.final_state.branch, Some(Phase::Stage2Fallback));
        assert_eq!(trace.stage_plan_count(2), 55);
        assert!(trace.entries.iter().filter(|e| e.plan.stage == 2).all(|e| e.plan.frozen_layers == 4));
    }
}

#[test]
fn plateau_after_epoch_five_stops_stage1_at_twenty() {
    let trace = run(TrajectorySpec::new("p", TrajectoryKind::Plateau { level: 0.6, at: 5 }));
    assert_eq!(trace.last_stage1_epoch(), Some(20));
    assert_eq!(trace.final_state.stage1_end, Some(StageEnd::EarlyStop));
}

#[test]
fn best_at_three_then_flat_stops_at_eighteen() {
    let mut values = vec![0.1, 0.2, 0.3, 0.4];
    values.extend([0.4; 40]);
    let trace = run(TrajectorySpec::new("s", TrajectoryKind::Scripted { values }));
    assert_eq!(trace.last_stage1_epoch(), Some(18));
}

#[test]
fn steady_climb_uses_full_stage1_budget() {
    let values: Vec<f64> = (0..200).map(|i| (0.1 + 0.005 * i as f64).min(1.0)).collect();
    let trace = run(TrajectorySpec::new("climb", TrajectoryKind::Scripted { values }));
    assert_eq!(trace.stage_plan_count(1), 35);
    assert_eq!(trace.final_state.stage1_end, Some(StageEnd::Budget));
    // Best stage-1 value is 0.1 + 0.005·34 = 0.27.
    assert_eq!(trace.final_state.branch, Some(Phase::Stage2Fallback));
}

#[test]
fn frozen_layers_match_thirds() {
    let values: Vec<f64> = (0..200).map(|i| (0.1 + 0.005 * i as f64).min(1.0)).collect();
    let trace = run(TrajectorySpec::new("climb", TrajectoryKind::Scripted { values }));
    let frozen: Vec<u32> = trace.entries.iter().take(35).map(|e| e.plan.frozen_layers).collect();
    let mut expected = vec![12; 12];
    expected.extend([8; 12]);
    expected.extend([4; 11]);
    assert_eq!(frozen, expected);
}

#[test]
fn same_spec_same_trace() {
    let spec = TrajectorySpec::new(
        "n",
        TrajectoryKind::NoisyLinear {
            start: 0.3,
            slope: 0.01,
            noise: 0.03,
            seed: 5,
        },
    );
    assert_eq!(run(spec.clone()), run(spec));
}

#[test]
fn scenario_file_runs_in_order() {
    let text = "hi saturating asymptote=0.8\nlo saturating asymptote=0.5\nflat plateau level=0.6 at=5\n";
    let specs = parse_scenarios(text).unwrap();
    let config = SchedulerConfig::default();
    let results = run_scenarios(&specs, &config).unwrap();
    let summaries: Vec<_> = results.iter().map(|r| r.summary()).collect();
    assert_eq!(summaries[0].branch, Some(Phase::Stage2Converged));
    assert_eq!(summaries[0].stage2_epochs, 45);
    assert_eq!(summaries[1].branch, Some(Phase::Stage2Fallback));
    assert_eq!(summaries[1].stage2_epochs, 55);
    assert_eq!(summaries[2].stage1_epochs, 21);
    let table = summary_table(&summaries, TableFormat::Text);
    assert!(table.lines().nth(2).unwrap().starts_with("hi"));
    assert!(table.contains("converged"));
    assert!(table.contains("fallback"));
    let csv = summary_table(&summaries, TableFormat::Csv);
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn persisted_trace_resumes_identically() {
    let spec = TrajectorySpec::saturating("hi", 0.8, 0.15);
    let config = SchedulerConfig::default();
    let full = run_session(&mut mock_trainer(spec.clone()).unwrap(), &config).unwrap();
    for cut in [0, 1, 17, 30, full.entries.len() - 1, full.entries.len()] {
        let mut buf = Vec::new();
        for e in &full.entries[..cut] {
            write_trace_entry(&mut buf, e).unwrap();
        }
        let entries = read_trace(buf.as_slice()).unwrap();
        let mut session = Session::resume(config.clone(), entries).unwrap();
        let finished = session.run(&mut mock_trainer(spec.clone()).unwrap()).unwrap();
        assert_eq!(finished, full, "cut at {cut}");
    }
}

#[test]
fn state_serialization_mid_run_continues_identically() {
    let config = SchedulerConfig::default();
    let spec = TrajectorySpec::saturating("hi", 0.8, 0.15);
    let mut a = Session::new(config.clone()).unwrap();
    let mut trainer = mock_trainer(spec).unwrap();
    for _ in 0..25 {
        a.step(&mut trainer).unwrap();
    }
    let state_json = serde_json::to_string(a.state()).unwrap();
    let restored: SchedulerState = serde_json::from_str(&state_json).unwrap();
    assert_eq!(&restored, a.state());
    let mut b = a.clone();
    let ta = a.run(&mut trainer.clone()).unwrap();
    let tb = b.run(&mut trainer).unwrap();
    assert_eq!(ta, tb);
}

#[test]
fn cosine_rate_strictly_decreases_inside_the_schedule() {
    for t_max in [1u32, 2, 44, 54] {
        assert_eq!(cosine_lr(1e-3, 1e-5, 0, t_max), 1e-3);
        assert_eq!(cosine_lr(1e-3, 1e-5, t_max, t_max), 1e-5);
        for t in 1..t_max {
            assert!(cosine_lr(1e-3, 1e-5, t, t_max) < cosine_lr(1e-3, 1e-5, t - 1, t_max));
        }
    }
}

#[test]
fn convergence_threshold_is_strict() {
    let config = SchedulerConfig::default();
    let feed = |maps: &[f64]| {
        let mut st = SchedulerState::new();
        for (i, &m) in maps.iter().enumerate() {
            st = observe(&st, &MetricReport::new(i as u32, m, 0.1), &config).unwrap();
        }
        st
    };
    // Window means differ by 0.0009 and by 0.0011.
    let mut below = vec![0.5; 8];
    below.extend([0.5009; 8]);
    let mut above = vec![0.5; 8];
    above.extend([0.5011; 8]);
    assert!(feed(&below).converged);
    assert!(!feed(&above).converged);
}

fn any_trajectory() -> impl Strategy<Value = TrajectorySpec> {
    prop_oneof![
        (0.0..=1.0f64, 0.0..1.0f64, 0.0..0.1f64, any::<u64>()).prop_map(|(a, r, n, s)| TrajectorySpec::new(
            "sat",
            TrajectoryKind::Saturating {
                asymptote: a,
                rate: r,
                noise: n,
                seed: s
            }
        )),
        (0.0..=1.0f64, 0u32..60).prop_map(|(l, at)| TrajectorySpec::new("plat", TrajectoryKind::Plateau { level: l, at })),
        (0.0..=1.0f64, -0.02..0.02f64, 0.0..0.1f64, any::<u64>()).prop_map(|(st, sl, n, s)| TrajectorySpec::new(
            "lin",
            TrajectoryKind::NoisyLinear {
                start: st,
                slope: sl,
                noise: n,
                seed: s
            }
        )),
        prop::collection::vec(0.0..=1.0f64, 1..120)
            .prop_map(|values| TrajectorySpec::new("script", TrajectoryKind::Scripted { values })),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn every_trace_passes_the_validator(spec in any_trajectory()) {
        let config = SchedulerConfig::default();
        let trace = run_session(&mut mock_trainer(spec).unwrap(), &config).unwrap();
        prop_assert!(validate_trace(&trace, &config).is_ok());
        let s1_best = trace.final_state.stage1_reports().iter().map(|r| r.map50).fold(0.0, f64::max);
        let expect = if s1_best > 0.7 { Phase::Stage2Converged } else { Phase::Stage2Fallback };
        prop_assert_eq!(trace.final_state.branch, Some(expect));
        prop_assert!(trace.stage_plan_count(1) <= 35);
        let s2 = trace.stage_plan_count(2);
        let budget = if expect == Phase::Stage2Converged { 45 } else { 55 };
        if trace.final_state.stage2_end == Some(StageEnd::Budget) {
            prop_assert_eq!(s2, budget);
        } else {
            prop_assert!(s2 < budget);
        }
    }

    #[test]
    fn convergence_flag_ignores_offsets(
        base in prop::collection::vec(0u32..400, 16..40),
        shift in 0u32..400,
    ) {
        // Values on a 1/1024 grid keep every sum exact, so the offset cannot
        // move the delta across the threshold through rounding.
        let maps: Vec<f64> = base.iter().map(|&v| v as f64 / 1024.0).collect();
        let shifted: Vec<f64> = maps.iter().map(|v| v + shift as f64 / 1024.0).collect();
        let d0 = window_delta(&maps, 8).unwrap();
        let d1 = window_delta(&shifted, 8).unwrap();
        prop_assert_eq!(d0 < 0.001, d1 < 0.001);
    }

    #[test]
    fn stage1_frozen_layers_never_increase(maps in prop::collection::vec(0.0..=1.0f64, 1..35)) {
        let config = SchedulerConfig::default();
        let trace = run_session(
            &mut mock_trainer(TrajectorySpec::new("s", TrajectoryKind::Scripted { values: maps })).unwrap(),
            &config,
        ).unwrap();
        let frozen: Vec<u32> = trace.entries.iter().filter(|e| e.plan.stage == 1).map(|e| e.plan.frozen_layers).collect();
        prop_assert!(frozen.windows(2).all(|w| w[1] <= w[0]));
    }
}
