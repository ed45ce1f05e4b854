//! Floating-point scalar abstraction.
//!
//! Everything numeric in this crate is generic over [`Scalar`], which is
//! implemented for `f32` and `f64`. The only operation that cannot be
//! expressed through `num_traits` is the dense complex matrix product, which
//! is routed to `matrixmultiply`'s width-specific kernels.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use matrixmultiply::CGemmOption;
use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};
use serde::{de::DeserializeOwned, Serialize};

/// Real scalar type underlying all state amplitudes and control values.
pub trait Scalar:
    Float
    + FloatConst
    + NumAssign
    + FromPrimitive
    + Sum
    + Debug
    + Display
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// C ← α·A·B + β·C for row/column-strided complex matrices.
    ///
    /// A is m×k, B is k×n, C is m×n; `rs*`/`cs*` are element strides.
    /// No aliasing between C and A/B is allowed.
    ///
    /// # Safety
    /// Pointers must be valid for the given dimensions and strides.
    #[allow(clippy::too_many_arguments)]
    unsafe fn cgemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: Complex<Self>,
        a: *const Complex<Self>,
        rsa: isize,
        csa: isize,
        b: *const Complex<Self>,
        rsb: isize,
        csb: isize,
        beta: Complex<Self>,
        c: *mut Complex<Self>,
        rsc: isize,
        csc: isize,
    );

    /// Shorthand for lossless conversion from `f64` (valid for literals and
    /// small integers used in coefficients).
    fn from_f64_lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal out of range for scalar type")
    }
}

impl Scalar for f64 {
    unsafe fn cgemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: Complex<f64>,
        a: *const Complex<f64>,
        rsa: isize,
        csa: isize,
        b: *const Complex<f64>,
        rsb: isize,
        csb: isize,
        beta: Complex<f64>,
        c: *mut Complex<f64>,
        rsc: isize,
        csc: isize,
    ) {
        // Complex<f64> is repr(C) and layout-compatible with [f64; 2].
        matrixmultiply::zgemm(
            CGemmOption::Standard,
            CGemmOption::Standard,
            m,
            k,
            n,
            [alpha.re, alpha.im],
            a as *const [f64; 2],
            rsa,
            csa,
            b as *const [f64; 2],
            rsb,
            csb,
            [beta.re, beta.im],
            c as *mut [f64; 2],
            rsc,
            csc,
        )
    }
}

impl Scalar for f32 {
    unsafe fn cgemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: Complex<f32>,
        a: *const Complex<f32>,
        rsa: isize,
        csa: isize,
        b: *const Complex<f32>,
        rsb: isize,
        csb: isize,
        beta: Complex<f32>,
        c: *mut Complex<f32>,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::cgemm(
            CGemmOption::Standard,
            CGemmOption::Standard,
            m,
            k,
            n,
            [alpha.re, alpha.im],
            a as *const [f32; 2],
            rsa,
            csa,
            b as *const [f32; 2],
            rsb,
            csb,
            [beta.re, beta.im],
            c as *mut [f32; 2],
            rsc,
            csc,
        )
    }
}
