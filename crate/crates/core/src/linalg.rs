//! Small complex linear-algebra helpers on top of `nalgebra`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub type CMat<T> = DMatrix<Complex<T>>;
pub type CVec<T> = DVector<Complex<T>>;

/// `|z|`, without requiring `num_traits::Float` on `T`.
#[inline]
pub(crate) fn modulus<T: Scalar>(z: &Complex<T>) -> T {
    z.re.hypot(z.im)
}

#[inline]
pub(crate) fn cplx<T: Scalar>(x: T) -> Complex<T> {
    Complex::new(x, T::zero())
}

/// Cholesky factor of a Hermitian positive-definite matrix.
pub(crate) fn hpd_cholesky<T: Scalar>(m: CMat<T>, what: &str) -> Result<Cholesky<Complex<T>, Dyn>> {
    Cholesky::new(m).ok_or_else(|| Error::Numerical(format!("{what} is not positive definite")))
}

/// `ln det A` from the Cholesky factor of `A`.
pub(crate) fn log_det<T: Scalar>(ch: &Cholesky<Complex<T>, Dyn>) -> T {
    let l = ch.l_dirty();
    let two = T::lit(2.0);
    (0..l.nrows()).fold(T::zero(), |acc, i| acc + two * l[(i, i)].re.ln())
}

/// `(A + Aᴴ) / 2`.
pub fn hermitian_part<T: Scalar>(m: &CMat<T>) -> CMat<T> {
    let half = cplx(T::lit(0.5));
    (m + m.adjoint()) * half
}

/// Largest entrywise modulus of `A − Aᴴ`.
pub fn hermitian_defect<T: Scalar>(m: &CMat<T>) -> T {
    (m - m.adjoint()).iter().fold(T::zero(), |acc, z| acc.max(modulus(z)))
}

/// Eigenvalues of the Hermitian part of `m`, ascending.
pub fn hermitian_eigenvalues<T: Scalar>(m: &CMat<T>) -> Vec<T> {
    let eig = SymmetricEigen::new(hermitian_part(m));
    let mut ev: Vec<T> = eig.eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).expect("NaN eigenvalue"));
    ev
}

/// True when `m` is Hermitian and positive semi-definite up to `tol`.
pub fn is_psd<T: Scalar>(m: &CMat<T>, tol: T) -> bool {
    if !m.is_square() {
        return false;
    }
    if m.nrows() == 0 {
        return true;
    }
    hermitian_defect(m) <= tol && hermitian_eigenvalues(m)[0] >= -tol
}

/// Inverse Hermitian square root `A^{-1/2}` of a positive-definite matrix, by eigendecomposition.
pub fn inverse_sqrt_hermitian<T: Scalar>(m: &CMat<T>) -> Result<CMat<T>> {
    let eig = SymmetricEigen::new(hermitian_part(m));
    if eig.eigenvalues.iter().any(|&l| l <= T::zero()) {
        return Err(Error::Numerical("matrix to whiten is not positive definite".into()));
    }
    let u = &eig.eigenvectors;
    let scale = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&l| cplx(T::one() / l.sqrt())),
    );
    let scaled = u * CMat::from_diagonal(&scale);
    Ok(scaled * u.adjoint())
}

/// `Re(vᴴ A v)`.
pub(crate) fn quad_form<T: Scalar>(v: &CVec<T>, a: &CMat<T>) -> T {
    v.dotc(&(a * v)).re
}

/// `Diag(d) · M`, scaling row `r` of `M` by `d[r]`.
pub(crate) fn scale_rows<T: Scalar>(d: &CVec<T>, m: &CMat<T>) -> CMat<T> {
    let mut out = m.clone();
    for (r, mut row) in out.row_iter_mut().enumerate() {
        row *= d[r];
    }
    out
}

pub(crate) fn identity<T: Scalar>(n: usize) -> CMat<T> {
    CMat::identity(n, n)
}

/// Numerically stable `ln Σ exp(xᵢ)`; `-∞` entries are ignored.
pub fn log_sum_exp<T: Scalar>(xs: &[T]) -> T {
    let Some(max) = xs.iter().copied().filter(|x| x.is_finite()).reduce(|a, b| a.max(b)) else {
        return T::lit(f64::NEG_INFINITY);
    };
    let sum = xs
        .iter()
        .filter(|x| x.is_finite())
        .fold(T::zero(), |acc, &x| acc + (x - max).exp());
    max + sum.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hpd() -> CMat<f64> {
        let a = CMat::<f64>::from_fn(3, 3, |i, j| {
            Complex::new((i + 2 * j) as f64 * 0.3, (i as f64 - j as f64) * 0.2)
        });
        a.adjoint() * &a + CMat::identity(3, 3)
    }

    #[test]
    fn inverse_sqrt_squares_to_inverse() {
        let m = hpd();
        let q = inverse_sqrt_hermitian(&m).unwrap();
        let prod = &q * &q * &m;
        assert!((prod - CMat::<f64>::identity(3, 3)).norm() < 1e-10);
        assert!(hermitian_defect(&q) < 1e-12);
    }

    #[test]
    fn log_det_matches_determinant() {
        let m = hpd();
        let ch = hpd_cholesky(m.clone(), "test").unwrap();
        let det = m.determinant();
        assert!((log_det(&ch) - det.re.ln()).abs() < 1e-10);
        assert!(det.im.abs() < 1e-10);
    }

    #[test]
    fn log_sum_exp_is_shift_invariant_and_skips_neg_inf() {
        let xs = [1000.0, 1000.0, f64::NEG_INFINITY];
        assert!((log_sum_exp(&xs) - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY; 2]), f64::NEG_INFINITY);
    }

    #[test]
    fn psd_check() {
        assert!(is_psd(&hpd(), 1e-10));
        let neg = -hpd();
        assert!(!is_psd(&neg, 1e-10));
    }
}
