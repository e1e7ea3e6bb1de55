//! Jacobi recurrence against the exact-rational Rodrigues oracle, and the two
//! theta-sum representations against each other.

use std::f64::consts::PI;

use hopf_heat::special_fn::{
    jacobi_eval, jacobi_sup_bound, theta_sum_direct, theta_sum_dual, JacobiIndex, JacobiSequence,
};
use num_rational::BigRational;
use num_traits::Zero;

mod common;
use common::{chebyshev_nodes, rodrigues};
use proptest::prelude::*;

#[test]
fn oracle_reproduces_known_polynomials() {
    // P_1^{(0,n)}(x) = ((n + 2) x - n) / 2
    let p = rodrigues(1, 3);
    assert_eq!(p.coeff(0), BigRational::new((-3).into(), 2.into()));
    assert_eq!(p.coeff(1), BigRational::new(5.into(), 2.into()));
    // Legendre P_2 = (3x^2 - 1) / 2
    let p = rodrigues(2, 0);
    assert_eq!(p.coeffs.len(), 3);
    assert_eq!(p.coeff(2), BigRational::new(3.into(), 2.into()));
    assert_eq!(p.coeff(1), BigRational::zero());
}

#[test]
fn recurrence_matches_rodrigues_low_degree() {
    let nodes = chebyshev_nodes(21);
    let mut worst = 0.0_f64;
    for n in 0..=10 {
        for k in 0..=30 {
            let exact = rodrigues(k, n);
            for &x in &nodes {
                let want = exact.eval(x);
                let got = jacobi_eval(JacobiIndex::new(k as u32, n as u32), x).unwrap();
                worst = worst.max((got - want).abs() / want.abs().max(1.0));
            }
        }
    }
    assert!(worst <= 1e-11, "worst scaled error {worst:e}");
}

#[test]
fn recurrence_matches_rodrigues_high_degree() {
    let nodes = chebyshev_nodes(21);
    for (k, n) in [(60, 0), (100, 7), (150, 40), (200, 0), (200, 100)] {
        let exact = rodrigues(k, n);
        // errors are measured against the polynomial's sup norm on the
        // interval: pointwise relative error is meaningless near its roots
        let scale = jacobi_sup_bound(JacobiIndex::new(k as u32, n as u32));
        for &x in nodes.iter().chain(&[1.0, -1.0]) {
            let want = exact.eval(x);
            let got = jacobi_eval(JacobiIndex::new(k as u32, n as u32), x).unwrap();
            let err = (got - want).abs() / scale;
            assert!(err <= 1e-12, "k={k} n={n} x={x}: {got} vs {want} ({err:e})");
        }
    }
}

#[test]
fn endpoint_values() {
    for n in 0..=50 {
        for k in 0..=200 {
            let idx = JacobiIndex::new(k, n);
            assert!((jacobi_eval(idx, 1.0).unwrap() - 1.0).abs() < 1e-12);
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let want = sign * jacobi_sup_bound(idx);
            let got = jacobi_eval(idx, -1.0).unwrap();
            assert!((got - want).abs() <= 1e-12 * want.abs(), "k={k} n={n}");
        }
    }
}

#[test]
fn domain() {
    assert!(jacobi_eval(JacobiIndex::new(2, 1), 1.0 + 1e-13).is_ok());
    assert!(jacobi_eval(JacobiIndex::new(2, 1), 1.0 + 1e-11).is_err());
    assert!(jacobi_eval(JacobiIndex::new(2, 1), f64::NAN).is_err());
    // a low-degree point, checked exactly
    let v = jacobi_eval(JacobiIndex::new(2, 1), 0.5).unwrap();
    assert!((v - rodrigues(2, 1).eval(0.5)).abs() < 1e-15);
}

#[test]
fn theta_representations_agree_on_grid() {
    let mut worst = 0.0_f64;
    for t in [0.05, 0.1, 0.5, 1.0, 5.0] {
        for i in 0..32 {
            let d = 0.1 * f64::from(i);
            let a = theta_sum_direct(t, d);
            let b = theta_sum_dual(t, d);
            worst = worst.max((a - b).abs() / (1.0 + a.abs()));
        }
    }
    assert!(worst <= 1e-10, "{worst:e}");
}

#[test]
fn theta_sum_large_time_example() {
    // the dual series at t = 5 is dominated by its first term
    let (t, d) = (5.0_f64, 0.3_f64);
    let lead = 4.0 * t.powf(1.5) / PI.sqrt() * d.sin() * (-t).exp();
    let v = theta_sum_dual(t, d);
    assert!((v - lead).abs() < 1e-5 * lead);
    assert!((theta_sum_direct(t, d) - v).abs() < 1e-12 * (1.0 + v.abs()));
}

proptest! {
    #[test]
    fn sequence_matches_single_evaluation(n in 0u32..40, k in 0u32..60, x in -1.0f64..=1.0) {
        let s = JacobiSequence::new(n, x).nth(k as usize).unwrap();
        prop_assert_eq!(s, jacobi_eval(JacobiIndex::new(k, n), x).unwrap());
    }

    #[test]
    fn bounded_by_sup(n in 0u32..30, k in 0u32..80, x in -1.0f64..=1.0) {
        let idx = JacobiIndex::new(k, n);
        let v = jacobi_eval(idx, x).unwrap();
        prop_assert!(v.abs() <= jacobi_sup_bound(idx) * (1.0 + 1e-12));
    }
}
