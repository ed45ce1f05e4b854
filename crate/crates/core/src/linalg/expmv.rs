//! Krylov-subspace propagator: ψ ← exp(−i·dt·H)·ψ for Hermitian H.
//!
//! A short Lanczos recurrence reduces H to a small real tridiagonal matrix
//! whose exponential is taken by dense eigendecomposition. The a-posteriori
//! error estimate triggers recursive step halving when the subspace cannot
//! represent the step (spectral width too large for the given dt).

use num_complex::Complex;

use super::{axpy, cdot, norm2, scale, symmetric_tridiag_eig, HermitianOp, LinalgError};
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct KrylovOptions<T> {
    /// Krylov subspace dimension.
    pub m_max: usize,
    /// Relative accuracy target per step.
    pub tol: T,
    /// Recursion limit for adaptive sub-stepping.
    pub max_substep_depth: usize,
}

impl<T: Scalar> Default for KrylovOptions<T> {
    fn default() -> Self {
        Self {
            m_max: 12,
            tol: T::from_f64_lit(1e-9),
            max_substep_depth: 24,
        }
    }
}

/// In-place application of exp(−i·dt·H). Preserves the norm of `psi` to
/// rounding accuracy (the Krylov-projected propagator is exactly unitary).
pub fn krylov_expmv<T: Scalar>(
    op: &dyn HermitianOp<T>,
    dt: T,
    psi: &mut [Complex<T>],
    opts: &KrylovOptions<T>,
) -> Result<(), LinalgError> {
    assert_eq!(psi.len(), op.dim());
    if dt == T::zero() {
        return Ok(());
    }
    step(op, dt, psi, opts, 0)
}

fn step<T: Scalar>(
    op: &dyn HermitianOp<T>,
    dt: T,
    psi: &mut [Complex<T>],
    opts: &KrylovOptions<T>,
    depth: usize,
) -> Result<(), LinalgError> {
    let dim = op.dim();
    let zero = Complex::new(T::zero(), T::zero());
    let beta0 = norm2(psi);
    if beta0 == T::zero() {
        return Ok(());
    }

    let m_cap = opts.m_max.min(dim);
    let mut basis: Vec<Vec<Complex<T>>> = Vec::with_capacity(m_cap);
    let mut v = psi.to_vec();
    scale(T::one() / beta0, &mut v);
    basis.push(v);

    let mut alpha: Vec<T> = Vec::with_capacity(m_cap);
    let mut beta: Vec<T> = Vec::with_capacity(m_cap);
    let mut w = vec![zero; dim];
    let mut happy = false;
    let mut b_last = T::zero();
    let mut scale_est = T::zero();

    for j in 0..m_cap {
        op.apply(&basis[j], &mut w);
        let a = cdot(&basis[j], &w).re;
        alpha.push(a);
        axpy(Complex::new(-a, T::zero()), &basis[j], &mut w);
        if j > 0 {
            axpy(Complex::new(-beta[j - 1], T::zero()), &basis[j - 1], &mut w);
        }
        scale_est = scale_est.max(a.abs());
        let b = norm2(&w);
        if b <= T::epsilon() * scale_est.max(T::one()) * T::from_f64_lit(16.0) {
            happy = true;
            break;
        }
        if j + 1 == m_cap {
            b_last = b;
            break;
        }
        beta.push(b);
        scale_est = scale_est.max(b);
        let mut q = w.clone();
        scale(T::one() / b, &mut q);
        basis.push(q);
    }

    let m = alpha.len();
    let (vals, z) = symmetric_tridiag_eig(&alpha, &beta[0..m - 1])?;
    // u = exp(−i dt T) e_1 expressed in the Lanczos basis.
    let mut u = vec![zero; m];
    for k in 0..m {
        let phase = Complex::from_polar(T::one(), -dt * vals[k]);
        let weight = phase * z[[0, k]];
        for r in 0..m {
            u[r] += weight * z[[r, k]];
        }
    }

    let err = if happy {
        T::zero()
    } else {
        b_last * u[m - 1].norm() * dt.abs()
    };
    if err > opts.tol {
        if depth >= opts.max_substep_depth {
            return Err(LinalgError::SubstepOverflow {
                estimate: err.to_f64().unwrap_or(f64::NAN),
            });
        }
        let half = dt / T::from_f64_lit(2.0);
        step(op, half, psi, opts, depth + 1)?;
        return step(op, half, psi, opts, depth + 1);
    }

    for p in psi.iter_mut() {
        *p = zero;
    }
    for (r, q) in basis.iter().enumerate() {
        axpy(u[r] * beta0, q, psi);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use num_complex::Complex64 as C64;

    struct Dense(Array2<C64>);

    impl HermitianOp<f64> for Dense {
        fn dim(&self) -> usize {
            self.0.nrows()
        }
        fn apply(&self, x: &[C64], y: &mut [C64]) {
            for i in 0..self.dim() {
                let mut acc = C64::new(0.0, 0.0);
                for j in 0..self.dim() {
                    acc += self.0[[i, j]] * x[j];
                }
                y[i] = acc;
            }
        }
    }

    fn exact_expmv(a: &Array2<C64>, dt: f64, x: &[C64]) -> Vec<C64> {
        let (vals, vecs) = crate::linalg::hermitian_eig(a).unwrap();
        let n = x.len();
        let mut out = vec![C64::new(0.0, 0.0); n];
        for k in 0..n {
            let col: Vec<C64> = (0..n).map(|i| vecs[[i, k]]).collect();
            let proj = cdot(&col, x);
            let phase = C64::from_polar(1.0, -dt * vals[k]);
            axpy(phase * proj, &col, &mut out);
        }
        out
    }

    #[test]
    fn matches_dense_exponential() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let n = 24;
        let mut a = Array2::<C64>::zeros((n, n));
        for i in 0..n {
            for j in 0..=i {
                let v = C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
                if i == j {
                    a[[i, j]] = C64::new(2.0 * v.re, 0.0);
                } else {
                    a[[i, j]] = v;
                    a[[j, i]] = v.conj();
                }
            }
        }
        let mut psi: Vec<C64> = (0..n)
            .map(|i| C64::new((i as f64 * 0.7).sin(), (i as f64 * 0.3).cos()))
            .collect();
        let nrm = norm2(&psi);
        scale(1.0 / nrm, &mut psi);
        let expect = exact_expmv(&a, 0.05, &psi);

        let op = Dense(a);
        krylov_expmv(&op, 0.05, &mut psi, &KrylovOptions::default()).unwrap();
        let err: f64 = psi
            .iter()
            .zip(&expect)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-9, "propagator error {err}");
        assert!((norm2(&psi) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn substepping_handles_large_dt() {
        let n = 16;
        let mut a = Array2::<C64>::zeros((n, n));
        for i in 0..n {
            a[[i, i]] = C64::new(10.0 * i as f64, 0.0);
        }
        let mut psi = vec![C64::new((1.0 / (n as f64)).sqrt(), 0.0); n];
        let expect = exact_expmv(&a, 3.0, &psi);
        let op = Dense(a);
        krylov_expmv(&op, 3.0, &mut psi, &KrylovOptions::default()).unwrap();
        let err: f64 = psi
            .iter()
            .zip(&expect)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-8, "substepped propagator error {err}");
    }

    #[test]
    fn zero_dt_is_identity() {
        let n = 4;
        let a = Array2::<C64>::eye(n);
        let psi0: Vec<C64> = (0..n).map(|i| C64::new(i as f64, -1.0)).collect();
        let mut psi = psi0.clone();
        let op = Dense(a);
        krylov_expmv(&op, 0.0, &mut psi, &KrylovOptions::default()).unwrap();
        assert_eq!(psi, psi0);
    }
}
