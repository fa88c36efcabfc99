use proptest::prelude::*;
use revchain::diagnostics::{
    abs_law, concentration, quantile_of, verify_quantile_intervals, verify_theorem, Budget, DiagError, Rates,
};
use revchain::limit::DiscreteDist;
use revchain::rates::{LogInverse, LogShift};
use revchain::report::Status;
use revchain::schedule::{mixing_schedule, variance_schedule};
use revchain::superposed::SuperChain;
use revchain::LogNum;

fn law(points: &[(f64, f64)]) -> DiscreteDist<f64> {
    let total: f64 = points.iter().map(|p| p.1).sum();
    DiscreteDist::from_pairs(points.iter().map(|&(x, p)| (x, p / total)).collect()).unwrap()
}

proptest! {
    #[test]
    fn tail_integral_at_one_is_the_second_moment(pts in prop::collection::vec((0.0f64..10.0, 0.01f64..1.0), 1..12)) {
        let d = law(&pts);
        let q = quantile_of(&d).unwrap();
        let m2: f64 = d.support.iter().zip(&d.probs).map(|(x, p)| x * x * p).sum();
        prop_assert!((q.tail_integral(1.0) - m2).abs() <= 1e-12 * m2.max(1.0));
    }

    #[test]
    fn quantile_is_nonincreasing(pts in prop::collection::vec((0.0f64..10.0, 0.01f64..1.0), 1..12)) {
        let q = quantile_of(&law(&pts)).unwrap();
        let mut prev = f64::INFINITY;
        for k in 0..=200 {
            let v = q.eval(k as f64 / 200.0);
            prop_assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn concentration_in_unit_interval(xs in prop::collection::vec(-3.0f64..3.0, 1..100), w in 0.01f64..5.0) {
        let c = concentration(&xs, w);
        prop_assert!(c > 0.0 && c <= 1.0);
        prop_assert!(concentration(&xs, w * 2.0) >= c);
    }
}

#[test]
fn negative_support_rejected() {
    let d = law(&[(-1.0, 1.0), (1.0, 1.0)]);
    assert!(matches!(quantile_of(&d), Err(DiagError::NegativeSupport(_))));
}

#[test]
fn quantile_works_in_log_domain() {
    let d = DiscreteDist::from_pairs(vec![(LogNum::ZERO, LogNum::new(0.5)), (LogNum::from_ln(900.0), LogNum::new(0.5))]).unwrap();
    let q = quantile_of(&d).unwrap();
    assert!((q.tail_integral(LogNum::ONE).ln() - (1800.0 + 0.5f64.ln())).abs() < 1e-12);
}

#[test]
fn abs_law_matches_levels() {
    let c = SuperChain::from_blocks(&[(1.0 / 9.0, 1.0 / 9.0, 1.0), (1.0 / 81.0, 1.0 / 27.0, 3.0)]).unwrap();
    let l = abs_law(&c).unwrap();
    let total: f64 = l.probs.iter().map(|p| p.value()).sum();
    assert!((total - 1.0).abs() < 1e-14);
    assert!((l.probs[0].value() - c.prob_zero().value()).abs() < 1e-15);
}

#[test]
fn interval_checks_need_probabilities_below_one_half() {
    assert!(verify_quantile_intervals(&[1.0], &[0.5]).is_err());
    assert!(verify_quantile_intervals(&[1.0, 2.0], &[0.25, 0.0625]).unwrap().iter().all(|c| c.passed()));
}

#[test]
fn variance_and_mixing_reports_pass() {
    let v = SuperChain::new(variance_schedule(&LogInverse, 5).unwrap(), 5).unwrap();
    let r = verify_theorem(&v, &Rates::Variance { q: &LogInverse }, &Budget::default(), 7);
    assert!(r.passed, "{:#?}", r.failed());
    assert!(r.checks.iter().any(|c| c.name == "variance_growth" && c.status == Status::Pass));
    let g = LogShift { shift: 3.0 };
    let m = SuperChain::new(mixing_schedule(&g, 4).unwrap(), 4).unwrap();
    let r = verify_theorem(&m, &Rates::Mixing { g: &g }, &Budget::default(), 7);
    assert!(r.passed, "{:#?}", r.failed());
    assert!(r.checks.iter().any(|c| c.name == "beta_bound" && c.status == Status::Pass));
}

#[test]
fn mismatched_kind_fails() {
    let v = SuperChain::new(variance_schedule(&LogInverse, 2).unwrap(), 2).unwrap();
    let g = LogShift { shift: 3.0 };
    let r = verify_theorem(&v, &Rates::Mixing { g: &g }, &Budget::default(), 1);
    assert!(!r.passed);
    assert!(r.failed().iter().any(|c| c.name == "kind_matches"));
}
