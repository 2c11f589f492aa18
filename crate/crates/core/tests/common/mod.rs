//! Independent reference computations for the integration tests.
//!
//! Everything here is written from the model definition with plain `powf`
//! and cofactor algebra, sharing no code with the library.

#![allow(dead_code)]

use gtdesign::{ParamVector, SizeBounds};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type M3 = [[f64; 3]; 3];

pub fn chlamydia() -> (ParamVector, SizeBounds) {
    (
        ParamVector::new(0.07, 0.93, 0.96).unwrap(),
        SizeBounds::new(1.0, 61.0).unwrap(),
    )
}

pub fn pi(t: [f64; 3], x: f64) -> f64 {
    t[1] - (t[1] + t[2] - 1.0) * (1.0 - t[0]).powf(x)
}

/// Partial derivatives of `pi` in `(p0, p1, p2)`.
pub fn grad(t: [f64; 3], x: f64) -> [f64; 3] {
    let s = t[1] + t[2] - 1.0;
    let b = 1.0 - t[0];
    [x * s * b.powf(x - 1.0), 1.0 - b.powf(x), -b.powf(x)]
}

pub fn weight(t: [f64; 3], x: f64) -> f64 {
    let p = pi(t, x);
    1.0 / (p * (1.0 - p))
}

pub fn info(t: [f64; 3], sizes: &[f64], weights: &[f64]) -> M3 {
    let mut m = [[0.0; 3]; 3];
    for (&x, &w) in sizes.iter().zip(weights) {
        let f = grad(t, x);
        let l = weight(t, x);
        for a in 0..3 {
            for b in 0..3 {
                m[a][b] += w * l * f[a] * f[b];
            }
        }
    }
    m
}

pub fn det3(m: &M3) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Inverse by the adjugate.
pub fn inv3(m: &M3) -> M3 {
    let d = det3(m);
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let (r0, r1) = ((j + 1) % 3, (j + 2) % 3);
            let (c0, c1) = ((i + 1) % 3, (i + 2) % 3);
            out[i][j] = (m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0]) / d;
        }
    }
    out
}

/// Rows are the gradients at the three sizes.
pub fn grad_matrix(t: [f64; 3], sizes: [f64; 3]) -> M3 {
    sizes.map(|x| grad(t, x))
}

/// Log-determinant of the equal-weight design on `sizes`.
pub fn d_profile(t: [f64; 3], sizes: [f64; 3]) -> f64 {
    det3(&info(t, &sizes, &[1.0 / 3.0; 3])).ln()
}

/// Best Ds value over weights on three sizes.
///
/// With `F` the gradient matrix, `(M^{-1})_{11} = sum_i (F^{-1})_{1i}^2 / (w_i lambda_i)`,
/// minimised over the simplex at `w_i ∝ |F^{-1}_{1i}| / sqrt(lambda_i)`.
pub fn ds_profile(t: [f64; 3], sizes: [f64; 3]) -> (f64, [f64; 3]) {
    let fi = inv3(&grad_matrix(t, sizes));
    let c: [f64; 3] = std::array::from_fn(|i| fi[0][i].abs() / weight(t, sizes[i]).sqrt());
    let total: f64 = c.iter().sum();
    (-2.0 * total.ln(), c.map(|v| v / total))
}

/// `(M^{-1})_{11}` for a three-point design with the given weights.
pub fn prevalence_variance(t: [f64; 3], sizes: [f64; 3], weights: [f64; 3]) -> f64 {
    inv3(&info(t, &sizes, &weights))[0][0]
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Parameters with `p0 in [0.01, 0.15]`, `p1, p2 in [0.85, 1]` and bounds with
/// `x_L in [1, 4]`, `x_U in [30, 80]`.
pub fn random_setting<R: Rng>(r: &mut R) -> (ParamVector, SizeBounds) {
    let theta = ParamVector::new(
        r.random_range(0.01..=0.15),
        r.random_range(0.85..=1.0),
        r.random_range(0.85..=1.0),
    )
    .unwrap();
    let lower = r.random_range(1.0..=4.0);
    let upper = r.random_range(30.0..=80.0);
    (theta, SizeBounds::new(lower, upper).unwrap())
}

/// Sign changes of `f` over `n` evenly spaced interior points of `(lo, hi)`.
pub fn sign_changes(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> usize {
    let mut count = 0;
    let mut prev = f(lo + (hi - lo) / (n + 1) as f64);
    for i in 2..=n {
        let v = f(lo + (hi - lo) * i as f64 / (n + 1) as f64);
        if v != 0.0 && prev != 0.0 && (v > 0.0) != (prev > 0.0) {
            count += 1;
        }
        if v != 0.0 {
            prev = v;
        }
    }
    count
}
