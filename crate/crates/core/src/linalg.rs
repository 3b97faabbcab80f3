//! Small dense helpers shared by the estimators.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Relative jitter added to the diagonal when a Cholesky factorization fails.
const JITTER: f64 = 1e-10;

/// Inverse of a Hermitian positive-definite matrix.
///
/// On factorization failure a diagonal jitter of `1e-10 * trace / n` is added
/// and the factorization is retried once.
pub fn hermitian_inverse(a: &CMatrix, iteration: usize) -> Result<CMatrix> {
    let n = a.nrows();
    let sym = hermitian_part(a);
    if let Some(ch) = sym.clone().cholesky() {
        return Ok(ch.inverse());
    }
    let trace: f64 = (0..n).map(|i| sym[(i, i)].re).sum();
    let jitter = JITTER * trace.abs().max(f64::MIN_POSITIVE) / n as f64;
    let mut retry = sym;
    for i in 0..n {
        retry[(i, i)] += Complex64::new(jitter, 0.0);
    }
    retry
        .cholesky()
        .map(|ch| ch.inverse())
        .ok_or_else(|| Error::NumericalFailure {
            iteration,
            reason: "matrix is not Hermitian positive definite".into(),
        })
}

/// Inverse of a real symmetric positive-definite matrix, same jitter policy.
pub fn spd_inverse(a: &DMatrix<f64>, iteration: usize) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let sym = (a + a.transpose()) * 0.5;
    if let Some(ch) = sym.clone().cholesky() {
        return Ok(ch.inverse());
    }
    let jitter = JITTER * sym.trace().abs().max(f64::MIN_POSITIVE) / n as f64;
    let mut retry = sym;
    for i in 0..n {
        retry[(i, i)] += jitter;
    }
    retry
        .cholesky()
        .map(|ch| ch.inverse())
        .ok_or_else(|| Error::NumericalFailure {
            iteration,
            reason: "matrix is not symmetric positive definite".into(),
        })
}

/// `(A + Aᴴ) / 2`.
pub fn hermitian_part(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()).map(|z| z * 0.5)
}

/// Frobenius norm of a complex matrix.
pub fn frobenius(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Element-wise (Hadamard) product.
pub fn hadamard(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.zip_map(b, |x, y| x * y)
}
