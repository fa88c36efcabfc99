use proptest::prelude::*;
use revchain::rates::{ConvexRate, LogShift, NegSlope, PowerRate, RateFn, SubexpRate};
use revchain::tangent::{build_h, check_h, find_t, find_t_star, max_tangent_violation, tangent_at, tangent_at_ln, TangentError};

const NEG_LOG: PowerRate = PowerRate { p: 1.0 };

proptest! {
    #[test]
    fn tangents_stay_below_convex_rates(ln_y in 0.01f64..25.0, p in 0.2f64..4.0, q in 0.05f64..0.95) {
        let xs: Vec<f64> = (0..=120).map(|k| (k as f64 * 0.25).exp()).collect();
        let y = ln_y.exp();
        for phi in [&PowerRate { p } as &dyn ConvexRate, &SubexpRate { q }] {
            let l = tangent_at(phi, y).unwrap();
            let scale = phi.value(y).abs().max(1.0);
            prop_assert!((l.at(y) - phi.value(y)).abs() <= 1e-12 * scale);
            prop_assert!(l.slope < 0.0);
            prop_assert!(max_tangent_violation(phi, y, &xs).unwrap() <= 1e-11 * scale);
        }
    }

    #[test]
    fn neg_log_threshold_matches_closed_form(d in -50.0f64..-0.01, ln_s in -20.0f64..5.0) {
        let s = ln_s.exp();
        let y = find_t(&NEG_LOG, d, s).unwrap().value();
        let o = (1.0 / s).max((1.0 - d).exp());
        prop_assert!(y >= o * (1.0 - 1e-12) && y <= o * (1.0 + 1e-10), "{} vs {}", y, o);
    }

    #[test]
    fn threshold_conditions_hold_past_t(d in -20.0f64..-0.1, ln_s in -12.0f64..0.0, q in 0.1f64..0.9) {
        let phi = SubexpRate { q };
        let t = find_t(&phi, d, ln_s.exp()).unwrap();
        for k in 0..30 {
            let tg = tangent_at_ln(&phi, t.ln() + k as f64 * 0.3).unwrap();
            prop_assert!(tg.ln_neg_slope <= ln_s + 1e-9 * ln_s.abs().max(1.0));
            prop_assert!(tg.intercept <= d + 1e-9 * d.abs());
        }
    }
}

#[test]
fn t_star_dominates_phi_plus_psi() {
    let psi = LogShift { shift: std::f64::consts::E };
    for phi in [&PowerRate { p: 2.0 } as &dyn ConvexRate, &SubexpRate { q: 0.5 }] {
        let r = find_t_star(phi, &psi, 2.0, -3.0, 0.05).unwrap();
        assert!(r.tangent.intercept + 2.0 <= -3.0 + 1e-12);
        for k in 0..=500 {
            let v = k as f64 * 0.1;
            assert!(r.tangent.at_ln(v) + 2.0 <= phi.value_at_ln(v) + psi.value_at_ln(v) + 1e-9);
        }
    }
}

#[test]
fn multiplier_conclusions_hold_for_both_presets() {
    let g = LogShift { shift: std::f64::consts::E };
    let grid: Vec<f64> = (0..=3000).map(|k| 80.0 * k as f64 / 3000.0).collect();
    for phi in [&PowerRate { p: 2.0 } as &dyn ConvexRate, &SubexpRate { q: 0.5 }] {
        let f = NegSlope(phi);
        let mut h = build_h(&f, &g).unwrap();
        let c = check_h(&mut h, &grid, 1e-12).unwrap();
        assert!(c.all(), "{}: {c:?}", phi.describe());
    }
}

#[test]
fn precondition_errors() {
    assert!(matches!(find_t(&NEG_LOG, 1.0, 1.0), Err(TangentError::Precondition(_))));
    assert!(tangent_at(&NEG_LOG, 0.5).is_err());
}
