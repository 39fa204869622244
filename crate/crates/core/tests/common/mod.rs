//! Reference values computed independently of the library.
#![allow(dead_code)]

use std::f64::consts::PI;

/// J₀ by its power series `Σ (−1)ᵏ (x/2)^{2k} / (k!)²`.
pub fn bessel_j0_series(x: f64) -> f64 {
    let q = -(x * x) / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..60 {
        term *= q / (k as f64 * k as f64);
        sum += term;
    }
    sum
}

/// First zero of J₀ by bisection on [2, 3].
pub fn j01_bisection() -> f64 {
    let (mut lo, mut hi) = (2.0, 3.0);
    assert!(bessel_j0_series(lo) > 0.0 && bessel_j0_series(hi) < 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if bessel_j0_series(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Principal Dirichlet eigenvalue of an interval of length `len`.
pub fn interval_eigenvalue(len: f64) -> f64 {
    PI * PI / (len * len)
}

/// Principal Dirichlet eigenvalue of a rectangle.
pub fn rectangle_eigenvalue(w: f64, h: f64) -> f64 {
    PI * PI * (1.0 / (w * w) + 1.0 / (h * h))
}

/// Principal eigenvalue of the 1-D tube `{d < ε}` around the two endpoints of
/// an interval longer than `2ε`: two intervals of length `2ε`.
pub fn interval_tube_eigenvalue(eps: f64) -> f64 {
    interval_eigenvalue(2.0 * eps)
}

/// Observed orders `log₂(e_k / e_{k+1})` of successive errors.
pub fn observed_orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}
