//! Oracles shared by the integration tests. Nothing here calls into the
//! library's own numerics.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

/// Spectral radius by plain power iteration.
///
/// A single dominant real eigenvalue makes consecutive iterates parallel; a
/// dominant complex pair (or a `+-rho` pair) makes them satisfy a two-term
/// recurrence `v2 = c1 v1 + c0 v0`, whose characteristic roots carry the
/// modulus. The one-term fit is tried first.
pub fn power_iteration_radius(a: &DMatrix<f64>, iterations: usize) -> f64 {
    let n = a.nrows();
    let mut v = DVector::from_fn(n, |i, _| 1.0 + 0.37 * i as f64 + (i as f64 * 1.7).sin());
    for _ in 0..iterations {
        v = a * &v;
        let norm = v.norm();
        if norm == 0.0 {
            return 0.0;
        }
        v /= norm;
    }
    let w1 = a * &v;
    let w2 = a * &w1;
    let lambda = v.dot(&w1) / v.dot(&v);
    if (&w1 - &v * lambda).norm() <= 1e-10 * w1.norm().max(1e-300) {
        return lambda.abs();
    }
    // least squares for w2 = c1 w1 + c0 v via 2x2 normal equations
    let (g11, g12, g22) = (w1.dot(&w1), w1.dot(&v), v.dot(&v));
    let (r1, r2) = (w1.dot(&w2), v.dot(&w2));
    let det = g11 * g22 - g12 * g12;
    let c1 = (r1 * g22 - r2 * g12) / det;
    let c0 = (g11 * r2 - g12 * r1) / det;
    let disc = c1 * c1 + 4.0 * c0;
    if disc < 0.0 {
        (-c0).sqrt()
    } else {
        let s = disc.sqrt();
        ((c1 + s) / 2.0).abs().max(((c1 - s) / 2.0).abs())
    }
}

/// Uniform random orthogonal matrix with determinant +1 (Gram-Schmidt on a
/// Gaussian-ish matrix built from uniform draws).
pub fn random_rotation(mut draw: impl FnMut() -> f64, m: usize) -> DMatrix<f64> {
    let mut cols: Vec<DVector<f64>> = Vec::with_capacity(m);
    while cols.len() < m {
        let mut c = DVector::from_fn(m, |_, _| draw());
        for q in &cols {
            let proj = q.dot(&c);
            c -= q * proj;
        }
        let norm = c.norm();
        if norm > 1e-3 {
            cols.push(c / norm);
        }
    }
    let mut r = DMatrix::from_columns(&cols);
    if r.determinant() < 0.0 {
        let flipped = -r.column(0);
        r.set_column(0, &flipped);
    }
    r
}

/// Rows of `p` mapped through `x -> m x + t`.
pub fn map_rows(p: &DMatrix<f64>, m: &DMatrix<f64>, t: &DVector<f64>) -> DMatrix<f64> {
    let mut q = p * m.transpose();
    for mut row in q.row_iter_mut() {
        row += t.transpose();
    }
    q
}
