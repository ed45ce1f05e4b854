//! Complex matrix products over `ndarray` views.

use ndarray::{Array2, ArrayView2, ArrayViewMut2};
use num_complex::Complex;

use crate::scalar::Scalar;

/// c ← α·a·b + β·c
///
/// Accepts arbitrary strides; a transposed view costs nothing.
pub fn matmul_into<T: Scalar>(
    alpha: Complex<T>,
    a: ArrayView2<Complex<T>>,
    b: ArrayView2<Complex<T>>,
    beta: Complex<T>,
    mut c: ArrayViewMut2<Complex<T>>,
) {
    let (m, k) = a.dim();
    let (k2, n) = b.dim();
    assert_eq!(k, k2, "inner dimensions must agree");
    assert_eq!(c.dim(), (m, n), "output shape mismatch");
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        // gemm kernels require k ≥ 1; the product is β·c.
        c.mapv_inplace(|x| beta * x);
        return;
    }
    unsafe {
        T::cgemm_raw(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            a.stride_of(ndarray::Axis(0)),
            a.stride_of(ndarray::Axis(1)),
            b.as_ptr(),
            b.stride_of(ndarray::Axis(0)),
            b.stride_of(ndarray::Axis(1)),
            beta,
            c.as_mut_ptr(),
            c.stride_of(ndarray::Axis(0)),
            c.stride_of(ndarray::Axis(1)),
        );
    }
}

/// a·b as a freshly allocated matrix.
pub fn matmul<T: Scalar>(a: ArrayView2<Complex<T>>, b: ArrayView2<Complex<T>>) -> Array2<Complex<T>> {
    let (m, _) = a.dim();
    let (_, n) = b.dim();
    let mut c = Array2::zeros((m, n));
    matmul_into(
        Complex::new(T::one(), T::zero()),
        a,
        b,
        Complex::new(T::zero(), T::zero()),
        c.view_mut(),
    );
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use num_complex::Complex64 as C64;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn small_product_matches_hand_result() {
        let a = array![[c(1.0, 1.0), c(2.0, 0.0)], [c(0.0, -1.0), c(1.0, 0.0)]];
        let b = array![[c(1.0, 0.0), c(0.0, 1.0)], [c(2.0, 1.0), c(1.0, 0.0)]];
        let p = matmul(a.view(), b.view());
        // row 0: (1+i)*1 + 2*(2+i) = 5+3i ; (1+i)*i + 2*1 = 1+i... (i + i^2) = -1+i, +2 = 1+i
        assert!((p[[0, 0]] - c(5.0, 3.0)).norm() < 1e-14);
        assert!((p[[0, 1]] - c(1.0, 1.0)).norm() < 1e-14);
        // row 1: -i*1 + 1*(2+1i) = 2 ; -i*i + 1 = 1+1 = 2
        assert!((p[[1, 0]] - c(2.0, 0.0)).norm() < 1e-14);
        assert!((p[[1, 1]] - c(2.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn transposed_view_product() {
        let a = array![[c(1.0, 0.0), c(2.0, 0.0)], [c(3.0, 0.0), c(4.0, 0.0)]];
        let at_a = matmul(a.t(), a.view());
        assert!((at_a[[0, 0]] - c(10.0, 0.0)).norm() < 1e-14);
        assert!((at_a[[0, 1]] - c(14.0, 0.0)).norm() < 1e-14);
        assert!((at_a[[1, 1]] - c(20.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn f32_kernel_works() {
        let a = array![[Complex::new(1.0f32, 0.0), Complex::new(0.0, 1.0)]];
        let b = array![[Complex::new(2.0f32, 0.0)], [Complex::new(0.0, -2.0)]];
        let p = matmul(a.view(), b.view());
        assert!((p[[0, 0]] - Complex::new(4.0f32, 0.0)).norm() < 1e-6);
    }

    #[test]
    fn zero_inner_dimension_scales_output() {
        let a = Array2::<C64>::zeros((2, 0));
        let b = Array2::<C64>::zeros((0, 3));
        let mut out = Array2::from_elem((2, 3), c(1.0, 0.0));
        matmul_into(c(1.0, 0.0), a.view(), b.view(), c(0.0, 0.0), out.view_mut());
        assert!(out.iter().all(|x| x.norm() == 0.0));
    }
}
