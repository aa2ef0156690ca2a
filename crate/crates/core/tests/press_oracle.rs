use mdelm_core::elm::{one_hot_targets, solve_ridge};
use mdelm_core::press::{Flip, PressOptions, PressState};
use mdelm_core::rng::rng_from_seed;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

fn gaussian(rng: &mut impl Rng, n: usize, d: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, d, |_, _| StandardNormal.sample(&mut *rng))
}

/// Residuals of each sample under a ridge model fitted without it.
fn brute_force_loo(h: &DMatrix<f64>, t: &DMatrix<f64>, lambda: f64) -> DMatrix<f64> {
    let n = h.nrows();
    let mut out = DMatrix::zeros(n, t.ncols());
    for i in 0..n {
        let keep: Vec<usize> = (0..n).filter(|&r| r != i).collect();
        let hi = h.select_rows(&keep);
        let ti = t.select_rows(&keep);
        let beta = solve_ridge(&hi, &ti, lambda).unwrap().output_weights;
        let pred = h.row(i) * &beta;
        for c in 0..t.ncols() {
            out[(i, c)] = t[(i, c)] - pred[c];
        }
    }
    out
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

#[test]
fn press_matches_explicit_retraining() {
    let mut rng = rng_from_seed(2024);
    for case in 0..30 {
        let d = rng.random_range(1..=10);
        let n = rng.random_range(d + 3..=40);
        let lambda = [1e-3, 1.0, 10.0][case % 3];
        let h = gaussian(&mut rng, n, d);
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..3)).collect();
        let t = one_hot_targets(&labels, 3).unwrap();
        let state = PressState::build(&h, &t, lambda).unwrap();
        let oracle = brute_force_loo(&h, &t, lambda);
        for (a, b) in state.press_residuals().iter().zip(oracle.iter()) {
            assert!(rel_close(*a, *b, 1e-8), "case {case}: {a} vs {b}");
        }
        let mse = oracle.iter().map(|v| v * v).sum::<f64>() / oracle.len() as f64;
        assert!(rel_close(state.loo_error(), mse, 1e-8));
    }
}

#[test]
fn flips_match_rebuild_and_commits_do_not_drift() {
    let mut rng = rng_from_seed(9);
    let (n, d, c) = (120, 30, 4);
    let h = gaussian(&mut rng, n, d);
    let mut labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..c)).collect();
    let mut state = PressState::from_labels(&h, &labels, c, 1.0).unwrap();
    for step in 0..200 {
        let k = rng.random_range(1..=2);
        let idx = mdelm_core::rng::sample_without_replacement(&mut rng, n, k);
        let new: Vec<usize> = idx.iter().map(|&i| (labels[i] + rng.random_range(1..c)) % c).collect();
        let flips: Vec<Flip> = idx.iter().zip(&new).map(|(&i, &l)| Flip::to_label(i, l, c)).collect();
        let mut flipped = labels.clone();
        for (&i, &l) in idx.iter().zip(&new) {
            flipped[i] = l;
        }
        let fresh = PressState::from_labels(&h, &flipped, c, 1.0).unwrap();
        let query = state.loo_error_after_flip(&flips).unwrap();
        assert!((query - fresh.loo_error()).abs() <= 1e-10, "step {step}");
        if step % 2 == 0 {
            assert_eq!(state.commit_flip(&flips).unwrap(), query);
            labels = flipped;
        }
    }
    let fresh = PressState::from_labels(&h, &labels, c, 1.0).unwrap();
    assert!((state.loo_error() - fresh.loo_error()).abs() <= 1e-8);
    for (a, b) in state.press_residuals().iter().zip(fresh.press_residuals().iter()) {
        assert!((a - b).abs() <= 1e-8);
    }
}

#[test]
fn on_demand_hat_matches_dense_on_flips() {
    let mut rng = rng_from_seed(4);
    let h = gaussian(&mut rng, 60, 8);
    let labels: Vec<usize> = (0..60).map(|i| i % 3).collect();
    let t = one_hot_targets(&labels, 3).unwrap();
    let dense = PressState::build(&h, &t, 0.5).unwrap();
    let lazy = PressState::build_with(
        &h,
        &t,
        0.5,
        PressOptions {
            dense_hat_limit: 10,
            column_cache: 4,
        },
    )
    .unwrap();
    assert!(!lazy.is_dense());
    for i in 0..60 {
        let flips = [Flip::to_label(i, (labels[i] + 1) % 3, 3), Flip::to_label((i + 7) % 60, 0, 3)];
        let a = dense.loo_error_after_flip(&flips).unwrap();
        let b = lazy.loo_error_after_flip(&flips).unwrap();
        assert!((a - b).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn prop_press_equals_loo_retraining(seed in any::<u64>(), d in 1usize..6, extra in 3usize..15, li in 0usize..3) {
        let lambda = [1e-3, 1.0, 10.0][li];
        let mut rng = rng_from_seed(seed);
        let n = d + extra;
        let h = gaussian(&mut rng, n, d);
        let t = gaussian(&mut rng, n, 2);
        let state = PressState::build(&h, &t, lambda).unwrap();
        let oracle = brute_force_loo(&h, &t, lambda);
        for (a, b) in state.press_residuals().iter().zip(oracle.iter()) {
            prop_assert!(rel_close(*a, *b, 1e-8));
        }
    }

    #[test]
    fn prop_leverage_in_unit_interval(seed in any::<u64>(), n in 2usize..30, d in 1usize..12, lambda in 1e-3f64..10.0) {
        let mut rng = rng_from_seed(seed);
        let h = gaussian(&mut rng, n, d);
        let t = gaussian(&mut rng, n, 1);
        if let Ok(state) = PressState::build(&h, &t, lambda) {
            for &v in state.hat_diag().iter() {
                prop_assert!((-1e-12..1.0).contains(&v));
            }
        }
    }

    #[test]
    fn prop_identity_flip_is_noop(seed in any::<u64>(), i in 0usize..20) {
        let mut rng = rng_from_seed(seed);
        let h = gaussian(&mut rng, 20, 4);
        let labels: Vec<usize> = (0..20).map(|_| rng.random_range(0..3)).collect();
        let state = PressState::from_labels(&h, &labels, 3, 1.0).unwrap();
        let after = state.loo_error_after_flip(&[Flip::to_label(i, labels[i], 3)]).unwrap();
        prop_assert_eq!(after, state.loo_error());
    }

    #[test]
    fn prop_commit_equals_query(seed in any::<u64>(), i in 0usize..25, j in 0usize..25) {
        prop_assume!(i != j);
        let mut rng = rng_from_seed(seed);
        let h = gaussian(&mut rng, 25, 5);
        let labels: Vec<usize> = (0..25).map(|_| rng.random_range(0..4)).collect();
        let mut state = PressState::from_labels(&h, &labels, 4, 1.0).unwrap();
        let flips = [Flip::to_label(i, (labels[i] + 1) % 4, 4), Flip::to_label(j, (labels[j] + 2) % 4, 4)];
        let q = state.loo_error_after_flip(&flips).unwrap();
        prop_assert_eq!(state.commit_flip(&flips).unwrap(), q);
    }
}
