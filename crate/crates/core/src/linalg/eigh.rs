//! Hermitian eigendecomposition: Householder tridiagonalization followed by
//! the implicit-shift QL iteration, with eigenvector accumulation.

use ndarray::Array2;
use num_complex::Complex;

use super::LinalgError;
use crate::scalar::Scalar;

/// Implicit-shift QL on a real symmetric tridiagonal matrix.
///
/// `d` holds the diagonal, `e` the subdiagonal (`e[i]` couples `i` and
/// `i+1`). On success `d` contains the eigenvalues (unsorted); every applied
/// plane rotation is reported through `rot(i, i+1, c, s)` so the caller can
/// accumulate eigenvectors in whatever storage it uses.
fn tql2_core<T: Scalar>(
    d: &mut [T],
    e: &mut [T],
    mut rot: impl FnMut(usize, usize, T, T),
) -> Result<(), LinalgError> {
    let n = d.len();
    if n == 0 {
        return Ok(());
    }
    assert_eq!(e.len(), n, "subdiagonal buffer must be padded to length n");
    let eps = T::epsilon();
    let two = T::from_f64_lit(2.0);

    for l in 0..n {
        let mut iter = 0usize;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= eps * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 80 {
                return Err(LinalgError::NoConvergence {
                    max_iter: 80,
                    residual: e[l].abs().to_f64().unwrap_or(f64::NAN),
                });
            }
            let mut g = (d[l + 1] - d[l]) / (two * e[l]);
            let mut r = g.hypot(T::one());
            let sign_r = if g >= T::zero() { r.abs() } else { -r.abs() };
            g = d[m] - d[l] + e[l] / (g + sign_r);
            let mut s = T::one();
            let mut c = T::one();
            let mut p = T::zero();
            let mut underflow = false;
            for i in (l..m).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == T::zero() {
                    d[i + 1] = d[i + 1] - p;
                    e[m] = T::zero();
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                f = (d[i] - g) * s + two * c * b;
                p = s * f;
                d[i + 1] = g + p;
                g = c * f - b;
                rot(i, i + 1, c, s);
            }
            if underflow {
                continue;
            }
            d[l] = d[l] - p;
            e[l] = g;
            e[m] = T::zero();
        }
    }
    Ok(())
}

/// Eigenvalues and eigenvectors of a real symmetric tridiagonal matrix.
///
/// Returns eigenvalues in ascending order and the matching real eigenvector
/// matrix (eigenvectors in columns).
pub fn symmetric_tridiag_eig<T: Scalar>(
    diag: &[T],
    sub: &[T],
) -> Result<(Vec<T>, Array2<T>), LinalgError> {
    let n = diag.len();
    assert!(sub.len() + 1 == n || (n == 0 && sub.is_empty()));
    let mut d = diag.to_vec();
    let mut e = sub.to_vec();
    e.push(T::zero());
    let mut z = Array2::<T>::eye(n);
    tql2_core(&mut d, &mut e, |i, j, c, s| {
        for k in 0..n {
            let zi = z[[k, i]];
            let zj = z[[k, j]];
            z[[k, j]] = s * zi + c * zj;
            z[[k, i]] = c * zi - s * zj;
        }
    })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].partial_cmp(&d[b]).unwrap());
    let vals: Vec<T> = order.iter().map(|&i| d[i]).collect();
    let mut vecs = Array2::<T>::zeros((n, n));
    for (new, &old) in order.iter().enumerate() {
        for k in 0..n {
            vecs[[k, new]] = z[[k, old]];
        }
    }
    Ok((vals, vecs))
}

/// Full eigendecomposition of a Hermitian matrix.
///
/// Returns eigenvalues ascending and a unitary matrix of eigenvectors
/// (columns), such that `a = v · diag(vals) · v†`. The input is read only;
/// only the lower triangle is referenced.
pub fn hermitian_eig<T: Scalar>(
    a: &Array2<Complex<T>>,
) -> Result<(Vec<T>, Array2<Complex<T>>), LinalgError> {
    let n = a.nrows();
    assert_eq!(a.ncols(), n, "matrix must be square");
    let zero = Complex::new(T::zero(), T::zero());
    if n == 0 {
        return Ok((vec![], Array2::zeros((0, 0))));
    }
    if n == 1 {
        let mut v = Array2::zeros((1, 1));
        v[[0, 0]] = Complex::new(T::one(), T::zero());
        return Ok((vec![a[[0, 0]].re], v));
    }

    let mut work = a.clone();
    // Householder vectors and their real coefficients, one per eliminated column.
    let mut hh: Vec<Vec<Complex<T>>> = Vec::with_capacity(n.saturating_sub(2));
    let mut taus: Vec<T> = Vec::with_capacity(n.saturating_sub(2));
    let mut sub_c: Vec<Complex<T>> = vec![zero; n - 1];

    for k in 0..n.saturating_sub(2) {
        let len = n - k - 1;
        let mut x: Vec<Complex<T>> = (0..len).map(|i| work[[k + 1 + i, k]]).collect();
        let xnorm = super::norm2(&x);
        if xnorm == T::zero() {
            sub_c[k] = zero;
            hh.push(vec![zero; len]);
            taus.push(T::zero());
            continue;
        }
        let phase = if x[0].norm() == T::zero() {
            Complex::new(T::one(), T::zero())
        } else {
            x[0] / Complex::new(x[0].norm(), T::zero())
        };
        let alpha = -phase * xnorm;
        x[0] -= alpha;
        let vnorm2 = x.iter().map(|v| v.norm_sqr()).fold(T::zero(), |s, t| s + t);
        if vnorm2 == T::zero() {
            sub_c[k] = alpha;
            hh.push(vec![zero; len]);
            taus.push(T::zero());
            continue;
        }
        let tau = T::from_f64_lit(2.0) / vnorm2;
        let v = x;

        // Two-sided update of the trailing block: B ← B − v w† − w v†,
        // w = p − (τ/2)(v†p) v, p = τ B v.
        let mut p = vec![zero; len];
        for r in 0..len {
            let mut acc = zero;
            for c in 0..len {
                // reference lower triangle: B[r][c] = conj(B[c][r]) when c > r
                let brc = if c <= r {
                    work[[k + 1 + r, k + 1 + c]]
                } else {
                    work[[k + 1 + c, k + 1 + r]].conj()
                };
                acc += brc * v[c];
            }
            p[r] = acc * tau;
        }
        let vtp = super::cdot(&v, &p);
        let half_tau_vtp = Complex::new(tau / T::from_f64_lit(2.0), T::zero()) * vtp;
        let w: Vec<Complex<T>> = p
            .iter()
            .zip(&v)
            .map(|(pi, vi)| pi - half_tau_vtp * vi)
            .collect();
        for r in 0..len {
            for c in 0..=r {
                let delta = v[r] * w[c].conj() + w[r] * v[c].conj();
                work[[k + 1 + r, k + 1 + c]] -= delta;
            }
        }
        sub_c[k] = alpha;
        hh.push(v);
        taus.push(tau);
    }
    if n >= 2 {
        sub_c[n - 2] = work[[n - 1, n - 2]];
    }

    let mut d: Vec<T> = (0..n).map(|i| work[[i, i]].re).collect();

    // Accumulate Q = H_0 · H_1 · … (backward pass keeps early products small).
    let mut q = Array2::<Complex<T>>::eye(n);
    for k in (0..hh.len()).rev() {
        let tau = taus[k];
        if tau == T::zero() {
            continue;
        }
        let v = &hh[k];
        let len = v.len();
        // Q[k+1.., k+1..] ← (I − τ v v†) Q[k+1.., k+1..]
        for col in k + 1..n {
            let mut acc = zero;
            for r in 0..len {
                acc += v[r].conj() * q[[k + 1 + r, col]];
            }
            acc *= Complex::new(tau, T::zero());
            for r in 0..len {
                let upd = acc * v[r];
                q[[k + 1 + r, col]] -= upd;
            }
        }
    }

    // Phase-rotate so the subdiagonal becomes real nonnegative.
    let mut e: Vec<T> = vec![T::zero(); n];
    let mut s_phase = vec![Complex::new(T::one(), T::zero()); n];
    for k in 0..n - 1 {
        let mag = sub_c[k].norm();
        let ph = if mag == T::zero() {
            Complex::new(T::one(), T::zero())
        } else {
            sub_c[k] / Complex::new(mag, T::zero())
        };
        e[k] = mag;
        s_phase[k + 1] = s_phase[k] * ph;
    }
    let mut z = q;
    for j in 0..n {
        if j > 0 {
            let ph = s_phase[j];
            for i in 0..n {
                z[[i, j]] *= ph;
            }
        }
    }

    tql2_core(&mut d, &mut e, |i, j, c, s| {
        for k in 0..n {
            let zi = z[[k, i]];
            let zj = z[[k, j]];
            z[[k, j]] = Complex::new(s, T::zero()) * zi + Complex::new(c, T::zero()) * zj;
            z[[k, i]] = Complex::new(c, T::zero()) * zi - Complex::new(s, T::zero()) * zj;
        }
    })?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].partial_cmp(&d[b]).unwrap());
    let vals: Vec<T> = order.iter().map(|&i| d[i]).collect();
    let mut vecs = Array2::<Complex<T>>::zeros((n, n));
    for (new, &old) in order.iter().enumerate() {
        for k in 0..n {
            vecs[[k, new]] = z[[k, old]];
        }
    }
    Ok((vals, vecs))
}
