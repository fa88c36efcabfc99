use proptest::prelude::*;
use revchain::block::{exact_alpha, exact_beta, exact_cov, n_step_joint, partial_sum_variance, sample_block_path, BlockError};
use revchain::superposed::block_beta;
use revchain::{construct_block, Block, Kernel, LogNum};

fn params() -> impl Strategy<Value = (f64, f64)> {
    (1e-6f64..=1.0 / 9.0, 1e-6f64..=1.0 / 9.0)
}

proptest! {
    #[test]
    fn same_side_mass_exceeds_opposite_by_geometric_term((e, t) in params(), n in 1u64..400) {
        let (_, k): (Block, Kernel) = construct_block(e, t).unwrap();
        let j = n_step_joint(&k, n).unwrap();
        let want = 0.5 * e * (1.0 - t).powi(n as i32) + j[2][0];
        prop_assert!((j[2][2] - want).abs() <= 1e-12);
        let want = 0.5 * e * (1.0 - t).powi(n as i32) + j[0][2];
        prop_assert!((j[0][0] - want).abs() <= 1e-12);
    }

    #[test]
    fn rows_are_stochastic_and_balanced((e, t) in params()) {
        let (_, k): (Block, Kernel) = construct_block(e, t).unwrap();
        for i in 0..3 {
            let s: f64 = k.transition[i].iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-14);
            for j in 0..3 {
                prop_assert!(k.transition[i][j] >= 0.0);
                let flow = k.marginal[i] * k.transition[i][j] - k.marginal[j] * k.transition[j][i];
                prop_assert!(flow.abs() < 1e-16);
            }
        }
    }

    #[test]
    fn mixing_coefficients_ordered((e, t) in params(), n in 1u64..400) {
        let (_, k) = construct_block(e, t).unwrap();
        let geo = e * (1.0 - t).powi(n as i32);
        let cov = exact_cov(&k, n).unwrap();
        let beta = exact_beta(&k, n).unwrap();
        let alpha = exact_alpha(&k, n).unwrap();
        prop_assert!((cov - geo).abs() <= 1e-11 * geo + 1e-300);
        prop_assert!(beta <= 6.0 * geo * (1.0 + 1e-12));
        prop_assert!(2.0 * alpha <= beta * (1.0 + 1e-12) + 1e-300);
        prop_assert!(beta <= 1.0);
        let closed = block_beta(LogNum::new(e), LogNum::new(t), n).value();
        prop_assert!((beta - closed).abs() <= 1e-10 * closed + 1e-280);
    }

    #[test]
    fn joint_law_is_symmetric_with_marginal_margins((e, t) in params(), n in 1u64..300) {
        let (_, k) = construct_block(e, t).unwrap();
        let j = n_step_joint(&k, n).unwrap();
        for a in 0..3 {
            let row: f64 = j[a].iter().sum();
            prop_assert!((row - k.marginal[a]).abs() < 1e-14);
            for b in 0..3 {
                prop_assert!((j[a][b] - j[b][a]).abs() < 1e-14);
            }
        }
    }
}

#[test]
fn theta_star_and_horizon() {
    let (b, _) = construct_block(1.0f64 / 9.0, 1.0 / 9.0).unwrap();
    assert!((b.theta_star - 1.0 / 8.0).abs() < 1e-16);
    assert_eq!(b.i_cap, 72);
    let (b, _) = construct_block(1.0 / 27.0, 1.0 / 27.0).unwrap();
    assert_eq!(b.i_cap, 702);
}

#[test]
fn rejects_parameters_outside_the_regime() {
    assert!(matches!(construct_block(0.2, 0.1), Err(BlockError::Range { .. })));
    assert!(construct_block(0.1, 0.0).is_err());
    let (_, k) = construct_block(0.1, 0.1).unwrap();
    assert!(exact_beta(&k, 0).is_err());
}

#[test]
fn single_precision_tracks_double() {
    let (_, k32) = construct_block(1.0f32 / 9.0, 1.0f32 / 27.0).unwrap();
    let (_, k64) = construct_block(1.0f64 / 9.0, 1.0f64 / 27.0).unwrap();
    for n in [1u64, 5, 50] {
        let a = exact_beta(&k32, n).unwrap() as f64;
        let b = exact_beta(&k64, n).unwrap();
        assert!((a - b).abs() < 1e-5 * b, "{n}: {a} vs {b}");
    }
}

#[test]
fn variance_per_step_rises_to_its_limit() {
    let (b, _) = construct_block(1.0f64 / 9.0, 1.0 / 9.0).unwrap();
    let v1 = partial_sum_variance(&b, 1);
    assert!((v1 - 1.0 / 9.0).abs() < 1e-16);
    let far = partial_sum_variance(&b, 10_000_000) / 1e7;
    // eps (2/theta - 1) - 2 eps r / (theta^2 n), with r^n negligible
    let want = 17.0 / 9.0 - 2.0 / 9.0 * (8.0 / 9.0) * 81.0 / 1e7;
    assert!((far - want).abs() < 1e-12, "{far} vs {want}");
}

#[test]
fn sampled_path_visits_states_at_marginal_rates() {
    let (_, k) = construct_block(1.0 / 9.0, 1.0 / 9.0).unwrap();
    let path = sample_block_path(&k, 400_000, 3);
    let zero = path.iter().filter(|s| **s == 0).count() as f64 / path.len() as f64;
    assert!((zero - 8.0 / 9.0).abs() < 0.01, "{zero}");
    assert_eq!(path, sample_block_path(&k, 400_000, 3));
}
