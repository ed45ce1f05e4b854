//! Thin Householder QR for complex matrices.

use ndarray::Array2;
use num_complex::Complex;

use crate::scalar::Scalar;

/// Thin QR factorization `a = q · r` with `q` of shape (m, k), `r` of shape
/// (k, n) upper triangular, k = min(m, n). `q` has orthonormal columns.
pub fn qr_thin<T: Scalar>(a: &Array2<Complex<T>>) -> (Array2<Complex<T>>, Array2<Complex<T>>) {
    let (m, n) = a.dim();
    let k = m.min(n);
    let zero = Complex::new(T::zero(), T::zero());
    let mut r = a.clone();
    let mut hh: Vec<Vec<Complex<T>>> = Vec::with_capacity(k);
    let mut taus: Vec<T> = Vec::with_capacity(k);

    for col in 0..k {
        let len = m - col;
        let mut v: Vec<Complex<T>> = (0..len).map(|i| r[[col + i, col]]).collect();
        let xnorm = super::norm2(&v);
        if xnorm == T::zero() {
            hh.push(vec![zero; len]);
            taus.push(T::zero());
            continue;
        }
        let phase = if v[0].norm() == T::zero() {
            Complex::new(T::one(), T::zero())
        } else {
            v[0] / Complex::new(v[0].norm(), T::zero())
        };
        let alpha = -phase * xnorm;
        v[0] -= alpha;
        let vnorm2 = v.iter().map(|x| x.norm_sqr()).fold(T::zero(), |s, t| s + t);
        if vnorm2 == T::zero() {
            hh.push(vec![zero; len]);
            taus.push(T::zero());
            continue;
        }
        let tau = T::from_f64_lit(2.0) / vnorm2;

        // R[col.., col..] ← (I − τ v v†) R[col.., col..]
        for c2 in col..n {
            let mut acc = zero;
            for i in 0..len {
                acc += v[i].conj() * r[[col + i, c2]];
            }
            acc *= Complex::new(tau, T::zero());
            for i in 0..len {
                let upd = acc * v[i];
                r[[col + i, c2]] -= upd;
            }
        }
        r[[col, col]] = alpha;
        for i in 1..len {
            r[[col + i, col]] = zero;
        }
        hh.push(v);
        taus.push(tau);
    }

    // Q = H_0 … H_{k-1} · [I_k; 0], accumulated backward.
    let mut q = Array2::<Complex<T>>::zeros((m, k));
    for j in 0..k {
        q[[j, j]] = Complex::new(T::one(), T::zero());
    }
    for col in (0..k).rev() {
        let tau = taus[col];
        if tau == T::zero() {
            continue;
        }
        let v = &hh[col];
        let len = m - col;
        for c2 in 0..k {
            let mut acc = zero;
            for i in 0..len {
                acc += v[i].conj() * q[[col + i, c2]];
            }
            acc *= Complex::new(tau, T::zero());
            for i in 0..len {
                let upd = acc * v[i];
                q[[col + i, c2]] -= upd;
            }
        }
    }

    let r_thin = r.slice(ndarray::s![0..k, ..]).to_owned();
    (q, r_thin)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::matmul;
    use num_complex::Complex64 as C64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn reconstructs_and_is_isometric() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (m, n) in [(6usize, 4usize), (4, 4), (9, 2), (3, 5)] {
            let a = Array2::from_shape_fn((m, n), |_| {
                C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
            });
            let (q, r) = qr_thin(&a);
            let k = m.min(n);
            assert_eq!(q.dim(), (m, k));
            assert_eq!(r.dim(), (k, n));
            let qr = matmul(q.view(), r.view());
            let err = (&qr - &a).iter().map(|x| x.norm()).fold(0.0, f64::max);
            assert!(err < 1e-13, "reconstruction error {err} at ({m},{n})");
            let qtq = matmul(q.t().mapv(|x| x.conj()).view(), q.view());
            for i in 0..k {
                for j in 0..k {
                    let t = if i == j { 1.0 } else { 0.0 };
                    assert!((qtq[[i, j]] - C64::new(t, 0.0)).norm() < 1e-13);
                }
            }
            // Upper triangularity.
            for i in 0..k {
                for j in 0..i.min(r.ncols()) {
                    assert!(r[[i, j]].norm() < 1e-14);
                }
            }
        }
    }
}
