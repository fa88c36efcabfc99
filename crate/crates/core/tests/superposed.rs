use proptest::prelude::*;
use revchain::rates::LogInverse;
use revchain::schedule::{engineered_schedule, variance_schedule};
use revchain::superposed::{block_variance, LevelConfig, SuperChain, SuperError};
use revchain::LogNum;

fn small_chain() -> SuperChain {
    SuperChain::from_blocks(&[
        (1.0 / 9.0, 1.0 / 9.0, 1.0 / 3.0),
        (1.0 / 81.0, 1.0 / 27.0, 1.0 / 9.0),
        (1.0 / 729.0, 1.0 / 81.0, 1.0 / 27.0),
    ])
    .unwrap()
}

proptest! {
    #[test]
    fn encoding_is_injective(a in prop::collection::vec(-1i8..=1, 3), b in prop::collection::vec(-1i8..=1, 3)) {
        let c = small_chain();
        let xa = c.encode(&LevelConfig { states: a.clone() }).unwrap();
        let xb = c.encode(&LevelConfig { states: b.clone() }).unwrap();
        prop_assert_eq!(xa == xb, a == b);
    }

    #[test]
    fn variance_is_the_sum_of_level_variances(n in 1u64..1_000_000) {
        let c = small_chain();
        let nl = LogNum::new(n as f64);
        let want: f64 = c.levels().iter().map(|l| l.h.value().powi(2) * block_variance(l.epsilon, l.theta, nl).value()).sum();
        let got = c.super_variance(nl).value();
        prop_assert!((got - want).abs() <= 1e-12 * want);
    }

    #[test]
    fn block_variance_matches_direct_sum(n in 1u64..300, k in 2i32..6, m in 2i32..6) {
        let (e, t) = (3f64.powi(-k), 3f64.powi(-m));
        let mut direct = n as f64;
        for lag in 1..n {
            direct += 2.0 * (n - lag) as f64 * (1.0 - t).powi(lag as i32);
        }
        direct *= e;
        let got = block_variance(LogNum::new(e), LogNum::new(t), LogNum::new(n as f64)).value();
        prop_assert!((got - direct).abs() <= 1e-10 * direct);
    }
}

#[test]
fn separation_is_enforced() {
    let s = revchain::schedule::custom_schedule("tight", &[(1.0 / 9.0, 1.0 / 9.0, 1.0), (1.0 / 81.0, 1.0 / 27.0, 2.0)]);
    let mut v = variance_schedule(&LogInverse, 2).unwrap();
    v.levels[1].h = v.levels[0].h * LogNum::new(0.5);
    assert!(matches!(SuperChain::new(v, 2), Err(SuperError::Separation { .. })));
    assert!(SuperChain::new(s, 2).is_err());
    assert!(matches!(SuperChain::new(engineered_schedule(2), 3), Err(SuperError::Truncation { .. })));
}

#[test]
fn sums_are_reproducible_and_budgeted() {
    let c = SuperChain::new(engineered_schedule(2), 2).unwrap();
    let a = c.scaled_sums(500, 200, 9, 1e9).unwrap();
    assert_eq!(a, c.scaled_sums(500, 200, 9, 1e9).unwrap());
    assert_ne!(a, c.scaled_sums(500, 200, 10, 1e9).unwrap());
    assert!(matches!(c.scaled_sums(500, 200, 9, 1.0), Err(SuperError::Budget { .. })));
}

#[test]
fn stationary_zero_frequency_matches_marginal() {
    let c = small_chain();
    let reps = 200;
    let mut zeros = 0usize;
    let mut total = 0usize;
    for r in 0..reps {
        let p = c.sample_super_path(2000, 5, r).unwrap();
        zeros += p.iter().filter(|x| **x == 0.0).count();
        total += p.len();
    }
    let want = c.prob_zero().value();
    let got = zeros as f64 / total as f64;
    assert!((got - want).abs() < 0.01, "{got} vs {want}");
}

#[test]
fn beta_bound_dominates_exact_truncated_beta() {
    let c = small_chain();
    for n in [1u64, 3, 10, 40] {
        let exact = c.super_beta_exact_small(n).unwrap();
        assert!(exact <= c.super_beta_bound(n).value() * (1.0 + 1e-12));
    }
}

#[test]
fn level_part_and_whole_share_streams() {
    let c = SuperChain::new(engineered_schedule(2), 2).unwrap();
    let part = c.level_normalized_sums(1, 500, 3, 1e9).unwrap();
    let whole = c.normalized_sum_samples(1, 500, 3, 1e9).unwrap();
    let (lower, _) = c.normalized_contamination(1).unwrap();
    assert!(lower.is_zero());
    // level 2 rarely moves within level 1's horizon
    let same = part.iter().zip(&whole).filter(|(a, b)| (*a - *b).abs() < 1e-9).count();
    assert!(same >= 480, "{same}");
}
