//! Dense and iterative linear algebra kernels.
//!
//! Self-contained so that every routine is generic over the [`Scalar`] width:
//! complex matrix products route through `matrixmultiply`, decompositions are
//! Householder-based, and the iterative solvers (ground state, propagator)
//! are Lanczos processes over a matrix-free [`HermitianOp`].

mod eigh;
mod expmv;
mod gemm;
mod lanczos;
mod qr;

pub use eigh::{hermitian_eig, symmetric_tridiag_eig};
pub use expmv::{krylov_expmv, KrylovOptions};
pub use gemm::{matmul, matmul_into};
pub use lanczos::{lanczos_lowest, LanczosOptions};
pub use qr::qr_thin;

use num_complex::Complex;
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("eigensolver failed to converge within {max_iter} iterations (residual {residual})")]
    NoConvergence { max_iter: usize, residual: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("krylov propagator exceeded the sub-stepping depth limit (last error estimate {estimate})")]
    SubstepOverflow { estimate: f64 },
}

/// Matrix-free Hermitian operator on complex vectors.
pub trait HermitianOp<T: Scalar>: Sync {
    fn dim(&self) -> usize;
    /// y ← H x
    fn apply(&self, x: &[Complex<T>], y: &mut [Complex<T>]);
}

/// ⟨x|y⟩ with the left argument conjugated.
pub fn cdot<T: Scalar>(x: &[Complex<T>], y: &[Complex<T>]) -> Complex<T> {
    debug_assert_eq!(x.len(), y.len());
    let mut acc = Complex::new(T::zero(), T::zero());
    for (a, b) in x.iter().zip(y) {
        acc += a.conj() * b;
    }
    acc
}

pub fn norm2<T: Scalar>(x: &[Complex<T>]) -> T {
    x.iter()
        .map(|a| a.re * a.re + a.im * a.im)
        .fold(T::zero(), |s, v| s + v)
        .sqrt()
}

/// y ← y + a·x
pub fn axpy<T: Scalar>(a: Complex<T>, x: &[Complex<T>], y: &mut [Complex<T>]) {
    debug_assert_eq!(x.len(), y.len());
    for (xi, yi) in x.iter().zip(y.iter_mut()) {
        *yi += a * xi;
    }
}

pub fn scale<T: Scalar>(a: T, x: &mut [Complex<T>]) {
    for xi in x.iter_mut() {
        *xi = Complex::new(xi.re * a, xi.im * a);
    }
}
