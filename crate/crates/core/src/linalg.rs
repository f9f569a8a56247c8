//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::{Error, Result};

pub fn ensure_square(m: &DMatrix<f64>) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(m.nrows())
}

pub fn ensure_finite(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

/// Operator 2-norm (largest singular value).
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    match m.nrows() {
        0 => 0.0,
        1 if m.ncols() == 1 => m[(0, 0)].abs(),
        _ => m
            .singular_values()
            .iter()
            .fold(0.0f64, |acc, &s| acc.max(s)),
    }
}

/// Largest eigenvalue of a symmetric matrix.
pub fn sym_eigmax(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 1 {
        return m[(0, 0)];
    }
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .fold(f64::NEG_INFINITY, |acc, &v| acc.max(v))
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn sym_eigmin(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 1 {
        return m[(0, 0)];
    }
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |acc, &v| acc.min(v))
}

/// Symmetric part `(M + Mᵀ)/2`.
pub fn symmetric_part(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Largest `θ` of the symmetric-definite pencil `S v = θ M v`, reduced to a
/// standard symmetric problem through the Cholesky factor of `M`.
pub fn generalized_eigmax(s: &DMatrix<f64>, m: &DMatrix<f64>) -> Result<f64> {
    let chol = Cholesky::new(m.clone()).ok_or(Error::GramNotPositive)?;
    let l = chol.l();
    // C = L⁻¹ S L⁻ᵀ
    let y = l
        .solve_lower_triangular(s)
        .ok_or(Error::Singular("cholesky factor"))?;
    let c = l
        .solve_lower_triangular(&y.transpose())
        .ok_or(Error::Singular("cholesky factor"))?;
    Ok(sym_eigmax(&symmetric_part(&c)))
}

/// As [`generalized_eigmax`] for a diagonal `M`, by elementwise scaling.
pub fn generalized_eigmax_diagonal(s: &DMatrix<f64>, diag: &[f64]) -> Result<f64> {
    if diag.iter().any(|&d| !(d > 0.0) || !d.is_finite()) {
        return Err(Error::GramNotPositive);
    }
    let inv: Vec<f64> = diag.iter().map(|d| 1.0 / d.sqrt()).collect();
    let c = DMatrix::from_fn(s.nrows(), s.ncols(), |i, j| s[(i, j)] * inv[i] * inv[j]);
    Ok(sym_eigmax(&c))
}

/// Largest Rayleigh quotient of `S` against `diag(d)` over the column span of
/// `basis`, via an orthonormal basis of `diag(d)^{1/2} basis`. Directions
/// whose singular value falls below `1e-10` of the largest are dropped.
pub fn projected_eigmax(s: &DMatrix<f64>, diag: &[f64], basis: &DMatrix<f64>) -> Result<f64> {
    if diag.iter().any(|&d| !(d > 0.0) || !d.is_finite()) {
        return Err(Error::GramNotPositive);
    }
    let root: Vec<f64> = diag.iter().map(|d| d.sqrt()).collect();
    let mut w = DMatrix::from_fn(basis.nrows(), basis.ncols(), |i, j| root[i] * basis[(i, j)]);
    for mut col in w.column_iter_mut() {
        let n = col.norm();
        if n > 0.0 {
            col /= n;
        }
    }
    let svd = w.svd(true, false);
    let u = svd.u.ok_or(Error::Singular("basis svd"))?;
    let top = svd.singular_values.max();
    if !(top > 0.0) {
        return Err(Error::GramNotPositive);
    }
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&k| svd.singular_values[k] > 1e-10 * top)
        .collect();
    let q = u.select_columns(&keep);
    let c = DMatrix::from_fn(s.nrows(), s.ncols(), |i, j| s[(i, j)] / (root[i] * root[j]));
    Ok(sym_eigmax(&symmetric_part(&(q.transpose() * c * &q))))
}

/// Eigenvalues of a general real matrix.
pub fn eigenvalues(m: &DMatrix<f64>) -> Vec<Complex64> {
    m.clone()
        .complex_eigenvalues()
        .iter()
        .map(|z| Complex64::new(z.re, z.im))
        .collect()
}

/// Determinant of a complex matrix by LU with partial pivoting.
pub fn complex_det(m: &DMatrix<Complex64>) -> Complex64 {
    let n = m.nrows();
    let mut a = m.clone();
    let mut det = Complex64::new(1.0, 0.0);
    for k in 0..n {
        let pivot = (k..n)
            .max_by(|&i, &j| a[(i, k)].norm().total_cmp(&a[(j, k)].norm()))
            .unwrap_or(k);
        if a[(pivot, k)].norm() == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        if pivot != k {
            a.swap_rows(pivot, k);
            det = -det;
        }
        let p = a[(k, k)];
        det *= p;
        for i in (k + 1)..n {
            let factor = a[(i, k)] / p;
            for j in (k + 1)..n {
                let v = a[(k, j)];
                a[(i, j)] -= factor * v;
            }
        }
    }
    det
}

/// Smallest singular value of a complex matrix.
pub fn complex_min_singular(m: &DMatrix<Complex64>) -> f64 {
    if m.nrows() == 1 && m.ncols() == 1 {
        return m[(0, 0)].norm();
    }
    let nm = m.map(|z| nalgebra::Complex::new(z.re, z.im));
    nm.singular_values()
        .iter()
        .fold(f64::INFINITY, |acc, &s| acc.min(s))
}

/// Numerical rank by singular values relative to the largest.
pub fn rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    let sv = m.singular_values();
    let top = sv.iter().fold(0.0f64, |a, &s| a.max(s));
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * top).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectral_norm_matches_known_values() {
        let m = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, -4.0]);
        assert!((spectral_norm(&m) - 4.0).abs() < 1e-14);
        let r = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        // golden ratio
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((spectral_norm(&r) - phi).abs() < 1e-14);
    }

    #[test]
    fn complex_det_of_rotation() {
        let z = |re, im| Complex64::new(re, im);
        let m = DMatrix::from_row_slice(2, 2, &[z(0.0, 1.0), z(2.0, 0.0), z(1.0, 0.0), z(0.0, -1.0)]);
        // i·(-i) - 2 = 1 - 2
        let d = complex_det(&m);
        assert!((d - z(-1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn generalized_matches_diagonal_path() {
        let s = DMatrix::from_row_slice(3, 3, &[1.0, 0.5, 0.0, 0.5, -2.0, 0.3, 0.0, 0.3, 0.7]);
        let d = [2.0, 0.5, 1.5];
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(&d));
        let a = generalized_eigmax(&s, &m).unwrap();
        let b = generalized_eigmax_diagonal(&s, &d).unwrap();
        assert!((a - b).abs() < 1e-13);
    }

    #[test]
    fn projection_matches_reduced_pencil() {
        let s = DMatrix::from_row_slice(3, 3, &[1.0, 0.5, 0.0, 0.5, -2.0, 0.3, 0.0, 0.3, 0.7]);
        let d = [2.0, 0.5, 1.5];
        let basis = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 1.0, 0.0, -1.0]);
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(&d));
        let reduced = generalized_eigmax(
            &(basis.transpose() * &s * &basis),
            &(basis.transpose() * m * &basis),
        )
        .unwrap();
        assert!((projected_eigmax(&s, &d, &basis).unwrap() - reduced).abs() < 1e-13);
        let full = projected_eigmax(&s, &d, &DMatrix::identity(3, 3)).unwrap();
        assert!((full - generalized_eigmax_diagonal(&s, &d).unwrap()).abs() < 1e-13);
    }

    #[test]
    fn non_positive_gram_rejected() {
        let s = DMatrix::identity(2, 2);
        assert!(generalized_eigmax_diagonal(&s, &[1.0, 0.0]).is_err());
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(generalized_eigmax(&s, &m).is_err());
    }
}
