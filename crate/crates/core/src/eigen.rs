//! Symmetric eigendecomposition with a residual check.
//!
//! nalgebra's implicit QL iteration returns NaN on some sparse inputs with
//! subnormal intermediate entries; those fall back to cyclic Jacobi rotations.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

const RESIDUAL_TOL: f64 = 1e-12;
const JACOBI_SWEEPS: usize = 100;

/// `(eigenvalues, eigenvectors as columns)` of a symmetric matrix.
pub(crate) fn sym_eigen(a: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let e = SymmetricEigen::new(a.clone());
    if acceptable(a, &e.eigenvalues, &e.eigenvectors) {
        return (e.eigenvalues, e.eigenvectors);
    }
    jacobi(a)
}

fn acceptable(a: &DMatrix<f64>, w: &DVector<f64>, v: &DMatrix<f64>) -> bool {
    if !(w.iter().all(|x| x.is_finite()) && v.iter().all(|x| x.is_finite())) {
        return false;
    }
    let scale = a.amax().max(f64::MIN_POSITIVE);
    let resid = (a * v - v * DMatrix::from_diagonal(w)).amax();
    let n = a.nrows();
    let orth = (v.transpose() * v - DMatrix::identity(n, n)).amax();
    resid <= RESIDUAL_TOL * scale && orth <= RESIDUAL_TOL
}

fn jacobi(a: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let mut m = a.clone();
    let mut v = DMatrix::identity(n, n);
    let scale = a.amax();
    for _ in 0..JACOBI_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)].powi(2))
            .sum();
        if off.sqrt() <= 1e-17 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq.abs() <= f64::MIN_POSITIVE * 1e3 {
                    m[(p, q)] = 0.0;
                    m[(q, p)] = 0.0;
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[(k, p)], m[(k, q)]);
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[(p, k)], m[(q, k)]);
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    (m.diagonal(), v)
}
