//! Small dense linear-algebra helpers shared by the filter builders.

use nalgebra::{ComplexField, DMatrix, Scalar};
use num_complex::Complex64;
use num_traits::Zero;

use crate::error::{Error, Result};

/// Smallest LU pivot magnitude accepted before a matrix is declared singular.
pub const PIVOT_THRESHOLD: f64 = 1e3 * f64::EPSILON;

/// Relative tolerance used when validating symmetry of real input matrices.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Returns a copy of `m` with its diagonal set to zero.
pub fn zero_diagonal<T: Scalar + Zero>(m: &DMatrix<T>) -> Result<DMatrix<T>> {
    let mut out = m.clone();
    zero_diagonal_mut(&mut out)?;
    Ok(out)
}

/// In-place form of [`zero_diagonal`].
pub fn zero_diagonal_mut<T: Scalar + Zero>(m: &mut DMatrix<T>) -> Result<()> {
    ensure_square(m)?;
    for i in 0..m.nrows() {
        m[(i, i)] = T::zero();
    }
    Ok(())
}

pub fn ensure_square<T: Scalar>(m: &DMatrix<T>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(())
}

/// Largest `|m_ij - m_ji|`, scaled by the largest entry magnitude.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let scale = m.amax().max(1.0);
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst / scale
}

pub fn ensure_symmetric(m: &DMatrix<f64>) -> Result<()> {
    ensure_square(m)?;
    let a = asymmetry(m);
    if a > SYMMETRY_TOL {
        return Err(Error::NotSymmetric(a));
    }
    Ok(())
}

/// Eigenvalues of a real symmetric matrix in descending order.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    ensure_symmetric(m)?;
    let eig = m.clone().try_symmetric_eigen(f64::EPSILON, 0).ok_or(Error::Eigen)?;
    let mut values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Eigen);
    }
    values.sort_by(|a, b| b.total_cmp(a));
    Ok(values)
}

/// Dense inverse through partial-pivot LU. Fails when any pivot falls below
/// [`PIVOT_THRESHOLD`] in magnitude.
pub fn invert<T>(m: &DMatrix<T>) -> Result<DMatrix<T>>
where
    T: ComplexField<RealField = f64>,
{
    ensure_square(m)?;
    let lu = m.clone().lu();
    let u = lu.u();
    let smallest = (0..u.nrows())
        .map(|i| u[(i, i)].clone().modulus())
        .fold(f64::INFINITY, f64::min);
    if !(smallest >= PIVOT_THRESHOLD) {
        return Err(Error::Singular(smallest));
    }
    lu.try_inverse().ok_or(Error::Singular(smallest))
}

/// Whether a Hermitian matrix is positive definite, by an unpivoted Cholesky
/// sweep that stops at the first non-positive pivot. Only the lower triangle is read.
pub fn is_hermitian_positive_definite(m: &DMatrix<Complex64>) -> bool {
    let n = m.nrows();
    if n != m.ncols() {
        return false;
    }
    let mut l = DMatrix::<Complex64>::zeros(n, n);
    for j in 0..n {
        let mut d = m[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if !(d > 0.0) {
            return false;
        }
        let d = d.sqrt();
        l[(j, j)] = Complex64::new(d, 0.0);
        for i in (j + 1)..n {
            let mut acc = m[(i, j)];
            for k in 0..j {
                acc -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = acc / d;
        }
    }
    true
}

/// Frobenius norm of `a - b`.
pub fn frobenius_distance<T>(a: &DMatrix<T>, b: &DMatrix<T>) -> f64
where
    T: ComplexField<RealField = f64>,
{
    (a - b).norm()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_diagonal_definition() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let z = zero_diagonal(&m).unwrap();
        assert_eq!(z, DMatrix::from_row_slice(2, 2, &[0.0, 2.0, 3.0, 0.0]));
        assert_eq!(zero_diagonal(&z).unwrap(), z);
        assert_eq!(
            zero_diagonal(&DMatrix::<f64>::identity(4, 4)).unwrap(),
            DMatrix::zeros(4, 4)
        );
    }

    #[test]
    fn zero_diagonal_rejects_rectangular() {
        let m = DMatrix::<f64>::zeros(2, 3);
        assert!(matches!(zero_diagonal(&m), Err(Error::NotSquare { rows: 2, cols: 3 })));
    }

    #[test]
    fn invert_detects_singular() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(invert(&m), Err(Error::Singular(_))));
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        let inv = invert(&m).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[1.0, -0.5, -0.5, 1.0]) / 0.75;
        assert!(frobenius_distance(&inv, &expected) < 1e-14);
    }

    #[test]
    fn hermitian_definiteness() {
        let c = |re: f64, im: f64| Complex64::new(re, im);
        let pd = DMatrix::from_row_slice(2, 2, &[c(2.0, 0.0), c(0.5, 0.5), c(0.5, -0.5), c(1.0, 0.0)]);
        assert!(is_hermitian_positive_definite(&pd));
        let indef = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 2.0), c(0.0, -2.0), c(1.0, 0.0)]);
        assert!(!is_hermitian_positive_definite(&indef));
        assert!(!is_hermitian_positive_definite(&DMatrix::zeros(2, 2)));
    }

    #[test]
    fn eigenvalues_sorted_descending() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        let ev = symmetric_eigenvalues(&m).unwrap();
        assert!((ev[0] - 1.5).abs() < 1e-14 && (ev[1] - 0.5).abs() < 1e-14);
    }
}
