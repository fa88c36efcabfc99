use proptest::prelude::*;
use revchain::LogNum;

proptest! {
    #[test]
    fn arithmetic_matches_f64(a in 1e-100f64..1e100, b in 1e-100f64..1e100) {
        let (x, y) = (LogNum::new(a), LogNum::new(b));
        prop_assert!(((x * y).value() - a * b).abs() <= 1e-13 * a * b);
        prop_assert!(((x / y).value() - a / b).abs() <= 1e-13 * a / b);
        prop_assert!(((x + y).value() - (a + b)).abs() <= 1e-13 * (a + b));
        let (hi, lo) = if a >= b { (x, y) } else { (y, x) };
        let diff = hi.checked_sub(lo).unwrap().value();
        prop_assert!((diff - (a - b).abs()).abs() <= 1e-12 * a.max(b));
        prop_assert_eq!(x < y, a < b);
    }

    #[test]
    fn far_beyond_f64(u in 800.0f64..1e250, v in 800.0f64..1e250) {
        let (x, y) = (LogNum::from_ln(u), LogNum::from_ln(v));
        prop_assert!(((x * y).ln() - (u + v)).abs() <= 1e-15 * (u + v));
        let s = (x + y).ln();
        prop_assert!(s >= u.max(v) && s <= u.max(v) + std::f64::consts::LN_2 + 1e-12);
        prop_assert!(!x.fits_f64());
    }
}

#[test]
fn zero_behaves() {
    assert!(LogNum::ZERO.is_zero());
    assert_eq!((LogNum::ZERO + LogNum::ONE).value(), 1.0);
    assert!((LogNum::ZERO * LogNum::from_ln(1e300)).is_zero());
    assert!(LogNum::new(0.5).checked_sub(LogNum::ONE).is_none());
}
