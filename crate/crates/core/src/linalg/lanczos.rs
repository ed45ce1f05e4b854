//! Lanczos iteration for the lowest eigenpair of a Hermitian operator.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{axpy, cdot, norm2, scale, symmetric_tridiag_eig, HermitianOp, LinalgError};
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct LanczosOptions<T> {
    /// Krylov basis size per restart cycle.
    pub max_basis: usize,
    /// Restart cycles before giving up.
    pub max_restarts: usize,
    /// Target residual ‖Hx − θx‖.
    pub tol: T,
    /// Seed for the deterministic random start when none is supplied.
    pub seed: u64,
}

impl<T: Scalar> Default for LanczosOptions<T> {
    fn default() -> Self {
        Self {
            max_basis: 80,
            max_restarts: 60,
            tol: T::from_f64_lit(1e-10),
            seed: 0x5eed,
        }
    }
}

/// Lowest eigenpair of `op` by restarted Lanczos with full
/// reorthogonalization. Deterministic for fixed options and start vector.
pub fn lanczos_lowest<T: Scalar>(
    op: &dyn HermitianOp<T>,
    start: Option<&[Complex<T>]>,
    opts: &LanczosOptions<T>,
) -> Result<(T, Vec<Complex<T>>), LinalgError> {
    let dim = op.dim();
    assert!(dim > 0, "operator dimension must be positive");
    let zero = Complex::new(T::zero(), T::zero());

    let mut v0: Vec<Complex<T>> = match start {
        Some(s) => {
            assert_eq!(s.len(), dim);
            s.to_vec()
        }
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            (0..dim)
                .map(|_| {
                    Complex::new(
                        T::from_f64_lit(rng.gen::<f64>() - 0.5),
                        T::from_f64_lit(rng.gen::<f64>() - 0.5),
                    )
                })
                .collect()
        }
    };
    let n0 = norm2(&v0);
    if n0 == T::zero() {
        // A zero start carries no information; fall back to e_0.
        v0 = vec![zero; dim];
        v0[0] = Complex::new(T::one(), T::zero());
    } else {
        scale(T::one() / n0, &mut v0);
    }

    let mut best_res = T::infinity();
    let m_cap = opts.max_basis.min(dim);

    for _restart in 0..opts.max_restarts {
        let mut basis: Vec<Vec<Complex<T>>> = vec![v0.clone()];
        let mut alpha: Vec<T> = Vec::with_capacity(m_cap);
        let mut beta: Vec<T> = Vec::with_capacity(m_cap);
        let mut w = vec![zero; dim];
        let mut scale_est = T::zero();

        for j in 0..m_cap {
            op.apply(&basis[j], &mut w);
            let a = cdot(&basis[j], &w).re;
            alpha.push(a);
            axpy(Complex::new(-a, T::zero()), &basis[j], &mut w);
            if j > 0 {
                axpy(Complex::new(-beta[j - 1], T::zero()), &basis[j - 1], &mut w);
            }
            // Full reorthogonalization, two passes.
            for _ in 0..2 {
                for q in &basis {
                    let ov = cdot(q, &w);
                    axpy(-ov, q, &mut w);
                }
            }
            scale_est = scale_est.max(a.abs());
            let b = norm2(&w);
            if b <= T::epsilon() * scale_est.max(T::one()) || j + 1 == m_cap {
                if b > T::zero() && j + 1 < m_cap {
                    // invariant subspace found; tridiagonal solve is exact
                }
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
        let theta = vals[0];
        // Ritz vector for the lowest Ritz value.
        let mut x = vec![zero; dim];
        for (j, q) in basis.iter().enumerate() {
            axpy(Complex::new(z[[j, 0]], T::zero()), q, &mut x);
        }
        let nx = norm2(&x);
        scale(T::one() / nx, &mut x);

        // True residual.
        op.apply(&x, &mut w);
        axpy(Complex::new(-theta, T::zero()), &x, &mut w);
        let res = norm2(&w);
        if res <= opts.tol {
            return Ok((theta, x));
        }
        best_res = best_res.min(res);
        v0 = x;
    }

    Err(LinalgError::NoConvergence {
        max_iter: opts.max_restarts * opts.max_basis,
        residual: best_res.to_f64().unwrap_or(f64::NAN),
    })
}
