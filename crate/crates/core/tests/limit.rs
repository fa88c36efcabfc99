use proptest::prelude::*;
use revchain::limit::{
    compound_pmf, g_dist, g_pmf, g_sampler, ks_distance, ks_to_normal, mu_p1sl_cf, sample_mu_p1sl, scaled_g_sums,
    tv_distance, DiscreteDist,
};
use revchain::superposed::block_sum_law;
use revchain::{construct_block, Dist};

proptest! {
    #[test]
    fn g_law_sums_to_one(a in 0.001f64..0.999, p in 0.01f64..0.999) {
        let d = g_dist(a, p, 1e-15).unwrap();
        let total: f64 = d.probs.iter().sum::<f64>() + d.tail_mass;
        prop_assert!((total - 1.0).abs() < 1e-12);
        prop_assert!(d.tail_mass <= 1e-15);
        prop_assert_eq!(g_pmf(a, p, 3).unwrap(), g_pmf(a, p, -3).unwrap());
    }

    #[test]
    fn ks_is_a_distance(xs in prop::collection::vec(-5.0f64..5.0, 1..60), ys in prop::collection::vec(-5.0f64..5.0, 1..60)) {
        let d = ks_distance(&xs, &ys);
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert_eq!(ks_distance(&xs, &xs), 0.0);
        prop_assert!((d - ks_distance(&ys, &xs)).abs() < 1e-15);
    }

    #[test]
    fn tv_bounds(a in 0.01f64..0.5, b in 0.01f64..0.5) {
        let x = g_dist(a, 0.5, 1e-14).unwrap();
        let y = g_dist(b, 0.5, 1e-14).unwrap();
        let d = tv_distance(&x, &y);
        prop_assert!(d >= (a - b).abs() / 2.0 - 1e-12);
        prop_assert!(d <= 1.0);
        prop_assert!(tv_distance(&x, &x) <= 1e-13);
    }
}

#[test]
fn compound_matches_direct_convolution() {
    let base = g_dist(0.3, 0.4, 1e-17).unwrap();
    let three = compound_pmf(&base, 3, 0.0).unwrap();
    for k in -4i64..=4 {
        let mut want = 0.0;
        for a in -40i64..=40 {
            for b in -40i64..=40 {
                want += g_pmf(0.3, 0.4, a).unwrap() * g_pmf(0.3, 0.4, b).unwrap() * g_pmf(0.3, 0.4, k - a - b).unwrap();
            }
        }
        let got = three.mass_at(k as f64);
        assert!((got - want).abs() < 1e-14, "{k}: {got} vs {want}");
    }
}

#[test]
fn block_sum_law_is_close_to_compound_g_at_the_horizon() {
    let (b, k) = construct_block(1.0 / 9.0, 1.0 / 9.0).unwrap();
    let law: Dist = block_sum_law(&k, b.i_cap).unwrap();
    let total: f64 = law.probs.iter().sum::<f64>() + law.tail_mass;
    assert!((total - 1.0).abs() < 1e-12);
    assert!(law.mean().abs() < 1e-12);
    let g = compound_pmf(&g_dist(b.theta_star / 9.0, 1.0 / 9.0, 1e-16).unwrap(), b.i_cap, 1e-18).unwrap();
    assert!(tv_distance(&law, &g) <= 3.0 / 9.0);
}

#[test]
fn sampler_frequencies() {
    let draws = g_sampler(0.2, 0.5, 5, 200_000).unwrap();
    let zero = draws.iter().filter(|k| **k == 0).count() as f64 / 2e5;
    let one = draws.iter().filter(|k| **k == 1).count() as f64 / 2e5;
    assert!((zero - 0.8).abs() < 0.004);
    assert!((one - 0.05).abs() < 0.002);
}

#[test]
fn limit_sample_moments() {
    let s = sample_mu_p1sl(11, 200_000);
    let n = s.len() as f64;
    let zero = s.iter().filter(|x| **x == 0.0).count() as f64 / n;
    assert!((zero - (-1f64).exp()).abs() < 0.005);
    let var = s.iter().map(|x| x * x).sum::<f64>() / n;
    assert!((var - 2.0).abs() < 0.05);
    let cf = s.iter().map(|x| x.cos()).sum::<f64>() / n;
    assert!((cf - mu_p1sl_cf(1.0)).abs() < 0.01);
    assert_eq!(s, sample_mu_p1sl(11, 200_000));
}

#[test]
fn scaled_sums_share_streams_across_parameters() {
    let a = scaled_g_sums(0.1, 0.1, 10, 3, 1000).unwrap();
    let b = scaled_g_sums(0.1, 0.1, 10, 3, 1000).unwrap();
    assert_eq!(a, b);
    assert!(scaled_g_sums(0.0, 0.1, 10, 3, 10).is_err());
}

#[test]
fn normal_ks_of_normal_quantiles_is_small() {
    use statrs::distribution::{ContinuousCDF, Normal};
    let law = Normal::new(0.0, 2.0).unwrap();
    let s: Vec<f64> = (1..2000).map(|k| law.inverse_cdf(k as f64 / 2000.0)).collect();
    assert!(ks_to_normal(&s, 2.0) <= 1.0 / 2000.0 + 1e-9);
    assert!(ks_to_normal(&s, 1.0) > 0.1);
}

#[test]
fn dist_rejects_bad_input() {
    assert!(DiscreteDist::new(vec![0.0, 1.0], vec![0.5], 0.0).is_err());
    assert!(DiscreteDist::<f64>::from_pairs(vec![(1.0, 0.5), (0.0, 0.5)]).is_ok());
}
