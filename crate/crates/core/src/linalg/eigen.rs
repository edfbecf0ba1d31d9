use nalgebra::DMatrix;

use super::matrix::{ComplexMatrix, C64};
use crate::error::{Error, Result};

/// Structural tolerance for Hermiticity checks.
pub const HERMITIAN_TOL: f64 = 1e-10;

fn to_nalgebra(m: &ComplexMatrix) -> DMatrix<C64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.data())
}

/// Eigenvalues (ascending) and eigenvectors (columns) of a Hermitian matrix.
pub fn hermitian_eigen(h: &ComplexMatrix) -> Result<(Vec<f64>, ComplexMatrix)> {
    let err = h.hermiticity_error();
    if err > HERMITIAN_TOL {
        return Err(Error::NotHermitian(err));
    }
    let eig = to_nalgebra(h).symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let n = h.rows();
    let vectors = ComplexMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok((values, vectors))
}

pub fn min_eigenvalue(h: &ComplexMatrix) -> Result<f64> {
    let (values, _) = hermitian_eigen(h)?;
    Ok(values[0])
}

/// `e^{−iHt}` through the spectral decomposition of `h`.
pub fn hermitian_evolve(h: &ComplexMatrix, t: f64) -> Result<ComplexMatrix> {
    let (values, vectors) = hermitian_eigen(h)?;
    let n = h.rows();
    let mut scaled = vectors.clone();
    for r in 0..n {
        for (c, e) in values.iter().enumerate() {
            scaled[(r, c)] *= C64::from_polar(1.0, -e * t);
        }
    }
    Ok(&scaled * &vectors.dagger())
}

/// Singular values in descending order.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// 2-norm condition number `σ_max / σ_min`.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let s = singular_values(m);
    let smin = *s.last().unwrap_or(&0.0);
    if smin == 0.0 {
        f64::INFINITY
    } else {
        s[0] / smin
    }
}
