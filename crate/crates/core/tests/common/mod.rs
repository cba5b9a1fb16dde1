//! Reference implementations shared by the integration tests. They are
//! deliberately naive and independent of the library code they check.
#![allow(dead_code)]

use std::path::PathBuf;

use equal_impact::closed_loop::{OutputMap, UserSpec};
use equal_impact::markov::AffineMap;

pub const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

/// Phi(x) = 1/2 + phi(x) * sum_n x^(2n+1) / (2n+1)!!
pub fn series_normal_cdf(x: f64) -> f64 {
    let ax = x.abs();
    let mut term = ax;
    let mut sum = ax;
    let mut n = 0.0;
    while term > 1e-18 * sum {
        n += 1.0;
        term *= ax * ax / (2.0 * n + 1.0);
        sum += term;
    }
    let half = (-0.5 * ax * ax).exp() / SQRT_2PI * sum;
    if x >= 0.0 {
        0.5 + half
    } else {
        0.5 - half
    }
}

/// Dense 0/1 matrix powers; smallest m <= (n-1)^2+1 with A^m > 0.
pub fn brute_primitivity_exponent(n: usize, arcs: &[(usize, usize)]) -> Option<usize> {
    let mut a = vec![vec![0u8; n]; n];
    for &(i, j) in arcs {
        a[i][j] = 1;
    }
    let mut p = a.clone();
    for m in 1..=(n - 1) * (n - 1) + 1 {
        if p.iter().flatten().all(|v| *v > 0) {
            return Some(m);
        }
        let mut q = vec![vec![0u8; n]; n];
        for i in 0..n {
            for k in 0..n {
                for j in 0..n {
                    if p[i][k] > 0 && a[k][j] > 0 {
                        q[i][j] = 1;
                    }
                }
            }
        }
        p = q;
    }
    None
}

/// A user whose state wanders between two contractions and whose 0/1 output
/// is drawn with probability `p_one` regardless of state.
pub fn binary_user(p_one: f64) -> UserSpec {
    UserSpec::new(
        1,
        vec![AffineMap::scalar(0.5, 0.0), AffineMap::scalar(0.5, 0.5)],
        vec![OutputMap::Constant(0.0), OutputMap::Constant(1.0)],
        vec![vec![0.5, 0.5]],
        vec![vec![1.0 - p_one, p_one]],
        Some(vec![0.0, 1.0]),
    )
    .unwrap()
}

/// Exact joint law of two independent 0/1 outputs, indexed `2 * y1 + y2`.
pub fn exact_joint(p1: f64, p2: f64) -> [f64; 4] {
    let mut out = [0.0; 4];
    for y1 in 0..2 {
        for y2 in 0..2 {
            let a = if y1 == 1 { p1 } else { 1.0 - p1 };
            let b = if y2 == 1 { p2 } else { 1.0 - p2 };
            out[2 * y1 + y2] = a * b;
        }
    }
    out
}

pub fn bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_equal-impact"))
}

pub fn spec_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/specs").join(format!("{name}.spec"))
}
