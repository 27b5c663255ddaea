use chaosfield::gaussian_oracle::*;
use chaosfield::Error;
use num_bigint::BigUint;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn big(v: u64) -> BigUint {
    BigUint::from(v)
}

/// `A Aᵀ` for a seeded random square `A`, a generic covariance.
fn random_cov(n: usize, seed: u64, scale: f64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0) * scale).collect()).collect();
    (0..n)
        .map(|i| (0..n).map(|j| (0..n).map(|k| a[i][k] * a[j][k]).sum()).collect())
        .collect()
}

#[test]
fn wick_coefficient_examples() {
    assert_eq!(wick_coefficient(0, 1).unwrap(), big(1));
    assert_eq!(wick_coefficient(0, 2).unwrap(), big(3));
    assert_eq!(wick_coefficient(1, 2).unwrap(), big(6));
    assert!(matches!(wick_coefficient(3, 2), Err(Error::OrderOutOfRange(_))));
    assert!(matches!(wick_coefficient(0, MAX_L + 1), Err(Error::OrderOutOfRange(_))));
    let t = WickCoefficients::new(MAX_L);
    for l in 0..=MAX_L {
        for k in 0..=l {
            assert!(*t.even(k, l).unwrap() > big(0));
            assert!(*t.odd(k, l).unwrap() > big(0));
        }
    }
}

#[test]
fn pairing_counts_match_coefficients() {
    for l in 0..=4 {
        let c = pairing_counts(2 * l).unwrap();
        for k in 0..=l {
            assert_eq!(big(c[2 * k]), wick_coefficient(k, l).unwrap(), "even l={l} k={k}");
            if 2 * k + 1 <= 2 * l {
                assert_eq!(c[2 * k + 1], 0);
            }
        }
    }
    for l in 0..4 {
        let c = pairing_counts(2 * l + 1).unwrap();
        for k in 0..=l {
            assert_eq!(big(c[2 * k + 1]), wick_coefficient_odd(k, l).unwrap(), "odd l={l} k={k}");
            assert_eq!(c[2 * k], 0);
        }
    }
    assert!(pairing_counts(MAX_FACTORS + 1).is_err());
}

#[test]
fn exp_moment_examples() {
    let spec = GaussianVectorSpec::new(vec![vec![0.7, 0.3, -0.2], vec![0.3, 1.0, 0.4], vec![-0.2, 0.4, 0.9]], 0).unwrap();
    let e = (0.35f64).exp();
    assert!((exp_weighted_moment(&spec, &[]).unwrap() - e).abs() < 1e-15);
    let want = (0.3 * -0.2 + 0.4) * e;
    assert!((exp_weighted_moment(&spec, &[1, 2]).unwrap() - want).abs() < 1e-14);
}

#[test]
fn exp_moment_matches_monte_carlo() {
    let cov = random_cov(4, 20240611, 0.6);
    let spec = GaussianVectorSpec::new(cov, 0).unwrap();
    let exact = exp_weighted_moment(&spec, &[1, 2, 3]).unwrap();
    let (mc, se) = exp_weighted_moment_mc(&spec, &[1, 2, 3], 10_000_000, 77);
    assert!((mc - exact).abs() < 4.0 * se, "exact {exact} mc {mc} se {se}");
}

#[test]
fn reduces_to_classical_wick() {
    let mut cov = vec![vec![0.0; 5]; 5];
    for (i, row) in cov.iter_mut().enumerate().skip(1) {
        row[i] = 1.0;
    }
    cov[0][0] = 0.5;
    let spec = GaussianVectorSpec::new(cov, 0).unwrap();
    let s = (0.25f64).exp();
    assert_eq!(exp_weighted_moment(&spec, &[1, 2, 3]).unwrap(), 0.0);
    assert!((exp_weighted_moment(&spec, &[1, 1, 1, 1]).unwrap() - 3.0 * s).abs() < 1e-14);
    assert!((exp_weighted_moment(&spec, &[1, 1, 2, 2]).unwrap() - s).abs() < 1e-14);
}

#[test]
fn ibp_catalog() {
    let spec = GaussianVectorSpec::new(vec![vec![1.0, 0.6], vec![0.6, 2.0]], 0).unwrap();
    let r = ibp_identity_check(&spec, TestFunction::Constant, 0, 0).unwrap();
    assert!(r.residual < 1e-12);
    let r = ibp_identity_check(&spec, TestFunction::Linear, 0, 0).unwrap();
    assert!(r.residual < 1e-10);
    let cov = random_cov(3, 5, 0.5);
    let spec = GaussianVectorSpec::new(cov, 0).unwrap();
    let r = ibp_identity_check(&spec, TestFunction::ExpSum, 2_000_000, 13).unwrap();
    assert!(r.residual < 5.0 * r.stderr, "{r:?}");
}

#[test]
fn kahane_examples() {
    let w = [0.3, 0.5, 0.2, 0.7];
    let b = kahane_bound_check(&w, &|_, _| 0.0, 2, KAHANE_BUDGET).unwrap();
    let s: f64 = w.iter().sum();
    assert!((b.lhs_even - s.powi(4)).abs() < 1e-12);
    assert!((b.rhs_even - s.powi(4)).abs() < 1e-12);
    let one = kahane_bound_check(&[0.4], &|_, _| 0.0, 3, KAHANE_BUDGET).unwrap();
    assert!((one.lhs_even - one.rhs_even).abs() < 1e-15);

    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let pts: Vec<f64> = (0..5).map(|_| rng.random::<f64>()).collect();
    let w: Vec<f64> = (0..5).map(|_| rng.random_range(0.05..1.0)).collect();
    let q = |i: usize, j: usize| -(pts[i] - pts[j]).abs().max(1e-3).ln();
    let b = kahane_bound_check(&w, &q, 2, KAHANE_BUDGET).unwrap();
    assert!(b.lhs_even <= b.rhs_even * (1.0 + 1e-12), "{b:?}");
    assert!(b.lhs_odd <= b.rhs_odd * (1.0 + 1e-12), "{b:?}");
    assert!(matches!(
        kahane_bound_check(&[1.0; 40], &q_zero, 3, 1000),
        Err(Error::CombinatorialBlowup { .. })
    ));
}

fn q_zero(_: usize, _: usize) -> f64 {
    0.0
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn kahane_lhs_below_rhs(
        pts in prop::collection::vec(0.0f64..1.0, 2..6),
        w in prop::collection::vec(0.01f64..1.0, 6),
        m in 1usize..3,
        scale in 0.0f64..1.0,
    ) {
        let n = pts.len();
        let w = &w[..n];
        let q = |i: usize, j: usize| scale * (1.0 / (pts[i] - pts[j]).abs().max(1e-2)).ln();
        let b = kahane_bound_check(w, &q, m, KAHANE_BUDGET).unwrap();
        prop_assert!(b.lhs_even <= b.rhs_even * (1.0 + 1e-12));
        prop_assert!(b.lhs_odd <= b.rhs_odd * (1.0 + 1e-12));
    }

    #[test]
    fn kahane_equality_for_zero_kernel(w in prop::collection::vec(0.01f64..1.0, 1..5), m in 1usize..3) {
        let b = kahane_bound_check(&w, &q_zero, m, KAHANE_BUDGET).unwrap();
        prop_assert!((b.lhs_even - b.rhs_even).abs() <= 1e-12 * b.rhs_even);
    }

    #[test]
    fn exp_moment_is_permutation_symmetric(seed in 0u64..1000, perm in Just(vec![2usize, 0, 3, 1]).prop_shuffle()) {
        let spec = GaussianVectorSpec::new(random_cov(5, seed, 0.7), 4).unwrap();
        let idx = [1usize, 2, 3, 0];
        let a = exp_weighted_moment(&spec, &idx).unwrap();
        let shuffled: Vec<usize> = perm.iter().map(|&p| idx[p]).collect();
        let b = exp_weighted_moment(&spec, &shuffled).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn odd_moments_vanish_without_exponent_coupling(seed in 0u64..1000, m in 0usize..4) {
        let mut cov = random_cov(4, seed, 0.8);
        for j in 0..3 {
            cov[j][3] = 0.0;
            cov[3][j] = 0.0;
        }
        let spec = GaussianVectorSpec::new(cov, 3).unwrap();
        let idx: Vec<usize> = (0..2 * m + 1).map(|i| i % 3).collect();
        prop_assert_eq!(exp_weighted_moment(&spec, &idx).unwrap(), 0.0);
    }
}
