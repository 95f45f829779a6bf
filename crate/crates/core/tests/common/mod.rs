//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

use std::f64::consts::PI;

/// Bessel function `J_0` by its power series; accurate to ~1e-15 for `x < 5`.
pub fn bessel_j0(x: f64) -> f64 {
    let q = -(x * x) / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..60 {
        term *= q / (k as f64 * k as f64);
        sum += term;
        if term.abs() < 1e-18 {
            break;
        }
    }
    sum
}

/// First positive zero of `J_0` by bisection on `[2, 3]`.
pub fn bessel_j0_first_zero() -> f64 {
    let (mut lo, mut hi) = (2.0, 3.0);
    assert!(bessel_j0(lo) > 0.0 && bessel_j0(hi) < 0.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if bessel_j0(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Smallest eigenvalue of the three-point `-a d^2/dx^2` on `(0, len)` with
/// `n` nodes and zero end values.
pub fn discrete_dirichlet_eigenvalue(n: usize, len: f64, a: f64) -> f64 {
    let h = len / (n - 1) as f64;
    a * 4.0 / (h * h) * (0.5 * PI * h / len).sin().powi(2)
}

/// Observed convergence order from errors at successively halved spacings.
pub fn observed_orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

#[test]
fn j0_zero_matches_tabulated_value() {
    assert!((bessel_j0_first_zero() - 2.404_825_557_695_773).abs() < 1e-12);
}
