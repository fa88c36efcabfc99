use proptest::prelude::*;
use revchain::rates::{LogInverse, LogShift, PowerRate, SubexpRate};
use revchain::report::Status;
use revchain::schedule::{
    custom_schedule, engineered_schedule, find_w, mixing_schedule, tail_schedule, validate_schedule, variance_schedule,
    LevelSchedule, ScheduleError, ScheduleKind,
};
use revchain::LogNum;

fn all_pass(s: &LevelSchedule) -> bool {
    validate_schedule(s).iter().all(|c| c.status != Status::Fail)
}

#[test]
fn variance_levels_follow_powers_of_three() {
    let s = variance_schedule(&LogInverse, 4).unwrap();
    assert_eq!(s.kind, ScheduleKind::Variance);
    for (k, l) in s.levels.iter().enumerate() {
        let j = (k + 1) as f64;
        assert!((l.h.ln() + j * 3f64.ln()).abs() < 1e-12);
        // every parameter is an exact power of 1/3
        for v in [l.epsilon.ln(), l.theta.ln()] {
            let e = -v / 3f64.ln();
            assert!((e - e.round()).abs() < 1e-6 * e.abs().max(1.0), "{e}");
        }
    }
    assert!(all_pass(&s));
}

#[test]
fn constructed_schedules_validate_to_depth_six() {
    assert!(all_pass(&variance_schedule(&LogInverse, 6).unwrap()));
    assert!(all_pass(&mixing_schedule(&LogShift { shift: 3.0 }, 6).unwrap()));
}

#[test]
fn tail_schedules_stop_where_floats_run_out() {
    let g = LogShift { shift: std::f64::consts::E };
    let e = tail_schedule(&PowerRate { p: 2.0 }, &g, 3).unwrap_err();
    let partial = e.partial().unwrap();
    assert_eq!(partial.len(), 1);
    assert!(all_pass(partial));
    let e = tail_schedule(&SubexpRate { q: 0.5 }, &g, 3).unwrap_err();
    assert!(matches!(e, ScheduleError::Level { level: 1, .. }));
    assert_eq!(find_w(&SubexpRate { q: 0.5 }).unwrap(), 4.0);
}

#[test]
fn engineered_horizons() {
    let s = engineered_schedule(3);
    let i: Vec<u64> = s.levels.iter().map(|l| l.i_exact.unwrap()).collect();
    assert_eq!(i, vec![72, 59022, 14348826]);
}

#[test]
fn text_round_trip_for_every_kind() {
    let g = LogShift { shift: std::f64::consts::E };
    let tail = tail_schedule(&PowerRate { p: 2.0 }, &g, 2).unwrap_err().partial().unwrap().clone();
    for s in [
        variance_schedule(&LogInverse, 3).unwrap(),
        mixing_schedule(&LogShift { shift: 3.0 }, 3).unwrap(),
        tail,
        engineered_schedule(2),
    ] {
        let back = LevelSchedule::from_text(&s.to_text()).unwrap();
        assert_eq!(back, s);
    }
}

#[test]
fn rejects_zero_depth_and_garbage_text() {
    assert!(matches!(variance_schedule(&LogInverse, 0), Err(ScheduleError::Input(_))));
    assert!(matches!(LevelSchedule::from_text("kind = 3"), Err(ScheduleError::Parse(_))));
}

proptest! {
    #[test]
    fn inflating_a_level_epsilon_is_caught(level in 0usize..4, factor in 1.5f64..100.0) {
        let mut s = variance_schedule(&LogInverse, 4).unwrap();
        let l = &mut s.levels[level];
        l.epsilon = l.epsilon * LogNum::new(factor);
        prop_assert!(!all_pass(&s));
    }

    #[test]
    fn custom_triples_keep_their_values(e in 1e-4f64..0.11, t in 1e-4f64..0.11) {
        let s = custom_schedule("one level", &[(e, t, 1.0)]);
        prop_assert!((s.levels[0].epsilon.value() - e).abs() < 1e-15);
        prop_assert!((s.levels[0].theta.value() - t).abs() < 1e-15);
        let back = LevelSchedule::from_text(&s.to_text()).unwrap();
        prop_assert_eq!(back, s);
    }
}
