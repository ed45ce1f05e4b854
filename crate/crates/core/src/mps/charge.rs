//! Charge-resolved operations on dense tensors.
//!
//! Bond bases carry the particle count to the left of the bond, one label
//! per basis vector. Number conservation then makes every matricized tensor
//! exactly block diagonal after grouping row/column indices by charge. The
//! helpers here gather the matched sub-blocks, run dense kernels on them,
//! and scatter the results back, which cuts the O(n³) work by roughly the
//! square of the number of occupied charge sectors.

use ndarray::{Array2, ArrayView2};
use num_complex::Complex;

use crate::linalg::{hermitian_eig, matmul};
use crate::scalar::Scalar;

/// Charge of the fused (bond, physical) row index a·d + n.
pub fn fuse_bond_phys(bond_q: &[i64], d: usize) -> Vec<i64> {
    let mut out = Vec::with_capacity(bond_q.len() * d);
    for &q in bond_q {
        for n in 0..d {
            out.push(q + n as i64);
        }
    }
    out
}

/// Charge of the fused (physical, bond) column index n·len + b, counting
/// particles strictly left of the originating bond: q[b] − n.
pub fn fuse_phys_bond(d: usize, bond_q: &[i64]) -> Vec<i64> {
    let mut out = Vec::with_capacity(bond_q.len() * d);
    for n in 0..d {
        for &q in bond_q {
            out.push(q - n as i64);
        }
    }
    out
}

/// Indices grouped by charge value, ascending in charge.
#[derive(Debug, Clone)]
pub struct ChargeGroups {
    pub charges: Vec<i64>,
    pub indices: Vec<Vec<usize>>,
}

impl ChargeGroups {
    pub fn group(q: &[i64]) -> Self {
        let mut map = std::collections::BTreeMap::<i64, Vec<usize>>::new();
        for (i, &c) in q.iter().enumerate() {
            map.entry(c).or_default().push(i);
        }
        let mut charges = Vec::with_capacity(map.len());
        let mut indices = Vec::with_capacity(map.len());
        for (c, idx) in map {
            charges.push(c);
            indices.push(idx);
        }
        Self { charges, indices }
    }

    pub fn find(&self, charge: i64) -> Option<&[usize]> {
        self.charges
            .binary_search(&charge)
            .ok()
            .map(|i| self.indices[i].as_slice())
    }
}

pub fn gather<T: Scalar>(
    src: ArrayView2<Complex<T>>,
    rows: &[usize],
    cols: &[usize],
) -> Array2<Complex<T>> {
    let mut out = Array2::zeros((rows.len(), cols.len()));
    for (ri, &r) in rows.iter().enumerate() {
        for (ci, &c) in cols.iter().enumerate() {
            out[[ri, ci]] = src[[r, c]];
        }
    }
    out
}

pub fn scatter_into<T: Scalar>(
    dst: &mut Array2<Complex<T>>,
    block: &Array2<Complex<T>>,
    rows: &[usize],
    cols: &[usize],
) {
    for (ri, &r) in rows.iter().enumerate() {
        for (ci, &c) in cols.iter().enumerate() {
            dst[[r, c]] = block[[ri, ci]];
        }
    }
}

/// a·b for charge-block-diagonal matrices: `a[r,c] = 0` unless
/// `a_row_q[r] == a_col_q[c]`, and likewise for `b` whose row charges are
/// `a_col_q`. The result is block diagonal over (`a_row_q`, `b_col_q`).
pub fn blocked_matmul<T: Scalar>(
    a: ArrayView2<Complex<T>>,
    a_row_q: &[i64],
    a_col_q: &[i64],
    b: ArrayView2<Complex<T>>,
    b_col_q: &[i64],
) -> Array2<Complex<T>> {
    debug_assert_eq!(a.nrows(), a_row_q.len());
    debug_assert_eq!(a.ncols(), a_col_q.len());
    debug_assert_eq!(b.nrows(), a_col_q.len());
    debug_assert_eq!(b.ncols(), b_col_q.len());
    let rows = ChargeGroups::group(a_row_q);
    let mids = ChargeGroups::group(a_col_q);
    let cols = ChargeGroups::group(b_col_q);
    let mut out = Array2::zeros((a.nrows(), b.ncols()));
    for (gi, &q) in rows.charges.iter().enumerate() {
        let (Some(mid), Some(col)) = (mids.find(q), cols.find(q)) else {
            continue;
        };
        let row = rows.indices[gi].as_slice();
        let ab = gather(a, row, mid);
        let bb = gather(b, mid, col);
        let prod = matmul(ab.view(), bb.view());
        scatter_into(&mut out, &prod, row, col);
    }
    out
}

/// Truncation policy for a single decomposition.
#[derive(Debug, Clone, Copy)]
pub struct TruncationSpec<T> {
    /// Hard cap on the number of kept singular values.
    pub m_max: usize,
    /// Additional adaptive truncation: trailing values are dropped while the
    /// cumulative relative discarded weight stays at or below this.
    pub weight_cutoff: T,
}

impl<T: Scalar> TruncationSpec<T> {
    pub fn exact() -> Self {
        Self {
            m_max: usize::MAX,
            weight_cutoff: T::zero(),
        }
    }
}

#[derive(Debug)]
pub struct BlockedSvdResult<T: Scalar> {
    /// (n_rows, k) isometry.
    pub u: Array2<Complex<T>>,
    /// Kept singular values, grouped by charge (descending within a group).
    pub sigma: Vec<T>,
    /// (k, n_cols) co-isometry (rows are right singular vectors).
    pub vh: Array2<Complex<T>>,
    /// Charge label per kept value.
    pub bond_charges: Vec<i64>,
    /// Relative weight Σσ²(dropped)/Σσ²(all) removed by truncation.
    pub discarded_weight: T,
}

/// Truncated SVD of a charge-block-diagonal matrix.
///
/// Each charge block is decomposed through the Gram matrix of its smaller
/// side (eigendecomposition), the computed side is re-orthonormalized, and
/// values are kept globally: the largest `m_max` across all blocks, further
/// shortened while the dropped weight stays within `weight_cutoff`.
pub fn blocked_svd<T: Scalar>(
    theta: ArrayView2<Complex<T>>,
    row_q: &[i64],
    col_q: &[i64],
    trunc: &TruncationSpec<T>,
) -> BlockedSvdResult<T> {
    debug_assert_eq!(theta.nrows(), row_q.len());
    debug_assert_eq!(theta.ncols(), col_q.len());
    let rows = ChargeGroups::group(row_q);
    let cols = ChargeGroups::group(col_q);

    struct Block<T: Scalar> {
        charge: i64,
        rows: Vec<usize>,
        cols: Vec<usize>,
        /// Descending singular values of the block.
        sigma: Vec<T>,
        /// Eigenvectors of the Gram side, matching `sigma` order (columns).
        gram_vecs: Array2<Complex<T>>,
        /// True when the Gram side was the column space.
        gram_is_col: bool,
        data: Array2<Complex<T>>,
    }

    let mut blocks: Vec<Block<T>> = Vec::new();
    let mut total_weight = T::zero();
    for (gi, &q) in rows.charges.iter().enumerate() {
        let Some(col) = cols.find(q) else { continue };
        let row = rows.indices[gi].as_slice();
        let data = gather(theta, row, col);
        let (p, c) = data.dim();
        let gram_is_col = c <= p;
        let gram = if gram_is_col {
            // Θ†Θ
            matmul(data.t().mapv(|x| x.conj()).view(), data.view())
        } else {
            // ΘΘ†
            matmul(data.view(), data.t().mapv(|x| x.conj()).view())
        };
        let (vals, vecs) = hermitian_eig(&gram).expect("gram eigendecomposition");
        let k = vals.len();
        // ascending eigenvalues → descending singular values
        let mut sigma = Vec::with_capacity(k);
        let mut gram_vecs = Array2::zeros((k, k));
        for j in 0..k {
            let lam = vals[k - 1 - j].max(T::zero());
            sigma.push(lam.sqrt());
            for r in 0..k {
                gram_vecs[[r, j]] = vecs[[r, k - 1 - j]];
            }
        }
        for &s in &sigma {
            total_weight += s * s;
        }
        blocks.push(Block {
            charge: q,
            rows: row.to_vec(),
            cols: col.to_vec(),
            sigma,
            gram_vecs,
            gram_is_col,
            data,
        });
    }

    // Global ranking of candidate values.
    let mut ranked: Vec<(usize, usize)> = Vec::new(); // (block, local index)
    for (bi, b) in blocks.iter().enumerate() {
        for li in 0..b.sigma.len() {
            ranked.push((bi, li));
        }
    }
    ranked.sort_by(|&(ba, la), &(bb, lb)| {
        blocks[bb].sigma[lb]
            .partial_cmp(&blocks[ba].sigma[la])
            .unwrap()
    });

    let eps_floor = if total_weight > T::zero() {
        total_weight.sqrt() * T::epsilon() * T::from_f64_lit(64.0)
    } else {
        T::zero()
    };
    let positive = ranked
        .iter()
        .take_while(|&&(b, l)| blocks[b].sigma[l] > eps_floor)
        .count();
    let mut keep = positive.min(trunc.m_max).max(1.min(positive));
    if keep == 0 {
        keep = 1.min(ranked.len());
    }
    // Shrink further while the dropped weight stays inside the cutoff.
    if trunc.weight_cutoff > T::zero() && total_weight > T::zero() {
        let budget = trunc.weight_cutoff * total_weight;
        let mut dropped: T = ranked
            .iter()
            .skip(keep)
            .map(|&(b, l)| {
                let s = blocks[b].sigma[l];
                s * s
            })
            .sum();
        while keep > 1 {
            let (b, l) = ranked[keep - 1];
            let w = blocks[b].sigma[l] * blocks[b].sigma[l];
            if dropped + w <= budget {
                dropped += w;
                keep -= 1;
            } else {
                break;
            }
        }
    }

    let kept = &ranked[0..keep];
    let mut kept_weight = T::zero();
    for &(b, l) in kept {
        kept_weight += blocks[b].sigma[l] * blocks[b].sigma[l];
    }
    let discarded_weight = if total_weight > T::zero() {
        ((total_weight - kept_weight) / total_weight).max(T::zero())
    } else {
        T::zero()
    };

    // Per block, the kept local indices (keep charge groups contiguous).
    let mut kept_per_block: Vec<Vec<usize>> = vec![Vec::new(); blocks.len()];
    for &(b, l) in kept {
        kept_per_block[b].push(l);
    }
    for lst in kept_per_block.iter_mut() {
        lst.sort_unstable();
    }

    let n_rows = theta.nrows();
    let n_cols = theta.ncols();
    let k_total: usize = kept_per_block.iter().map(|v| v.len()).sum();
    let mut u = Array2::zeros((n_rows, k_total));
    let mut vh = Array2::zeros((k_total, n_cols));
    let mut sigma_out = Vec::with_capacity(k_total);
    let mut charges_out = Vec::with_capacity(k_total);

    let mut offset = 0usize;
    for (bi, block) in blocks.iter().enumerate() {
        let locals = &kept_per_block[bi];
        if locals.is_empty() {
            continue;
        }
        let kb = locals.len();
        let (p, c) = block.data.dim();
        // Columns of the Gram eigenbasis for the kept values.
        let side = if block.gram_is_col { c } else { p };
        let mut g = Array2::<Complex<T>>::zeros((side, kb));
        for (jj, &l) in locals.iter().enumerate() {
            for r in 0..side {
                g[[r, jj]] = block.gram_vecs[[r, l]];
            }
        }
        let (u_blk, vh_blk) = if block.gram_is_col {
            // V = g; U = Θ V Σ⁻¹, re-orthonormalized.
            let mut ub = matmul(block.data.view(), g.view());
            for (jj, &l) in locals.iter().enumerate() {
                let s = block.sigma[l];
                let inv = if s > T::zero() { T::one() / s } else { T::zero() };
                for r in 0..p {
                    ub[[r, jj]] = Complex::new(ub[[r, jj]].re * inv, ub[[r, jj]].im * inv);
                }
            }
            orthonormalize_columns(&mut ub);
            let vhb = g.t().mapv(|x| x.conj());
            (ub, vhb)
        } else {
            // U = g; V† = Σ⁻¹ U† Θ, re-orthonormalized (as rows).
            let mut w = matmul(g.t().mapv(|x| x.conj()).view(), block.data.view());
            for (jj, &l) in locals.iter().enumerate() {
                let s = block.sigma[l];
                let inv = if s > T::zero() { T::one() / s } else { T::zero() };
                for cc in 0..c {
                    w[[jj, cc]] = Complex::new(w[[jj, cc]].re * inv, w[[jj, cc]].im * inv);
                }
            }
            let mut wt = w.t().mapv(|x| x.conj());
            orthonormalize_columns(&mut wt);
            let vhb = wt.t().mapv(|x| x.conj());
            (g, vhb)
        };
        for (jj, &l) in locals.iter().enumerate() {
            sigma_out.push(block.sigma[l]);
            charges_out.push(block.charge);
            for (ri, &r) in block.rows.iter().enumerate() {
                u[[r, offset + jj]] = u_blk[[ri, jj]];
            }
            for (ci, &cc) in block.cols.iter().enumerate() {
                vh[[offset + jj, cc]] = vh_blk[[jj, ci]];
            }
        }
        offset += kb;
    }

    BlockedSvdResult {
        u,
        sigma: sigma_out,
        vh,
        bond_charges: charges_out,
        discarded_weight,
    }
}

/// Two rounds of modified Gram-Schmidt on the columns.
fn orthonormalize_columns<T: Scalar>(m: &mut Array2<Complex<T>>) {
    let (rows, cols) = m.dim();
    for _ in 0..2 {
        for j in 0..cols {
            for i in 0..j {
                let mut ov = Complex::new(T::zero(), T::zero());
                for r in 0..rows {
                    ov += m[[r, i]].conj() * m[[r, j]];
                }
                for r in 0..rows {
                    let upd = ov * m[[r, i]];
                    m[[r, j]] -= upd;
                }
            }
            let mut nrm = T::zero();
            for r in 0..rows {
                nrm += m[[r, j]].norm_sqr();
            }
            let nrm = nrm.sqrt();
            if nrm > T::zero() {
                let inv = T::one() / nrm;
                for r in 0..rows {
                    m[[r, j]] = Complex::new(m[[r, j]].re * inv, m[[r, j]].im * inv);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64 as C64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_blocked(
        rng: &mut ChaCha8Rng,
        row_q: &[i64],
        col_q: &[i64],
    ) -> Array2<C64> {
        let mut m = Array2::zeros((row_q.len(), col_q.len()));
        for (i, &qr) in row_q.iter().enumerate() {
            for (j, &qc) in col_q.iter().enumerate() {
                if qr == qc {
                    m[[i, j]] = C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
                }
            }
        }
        m
    }

    #[test]
    fn blocked_matmul_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let qa = vec![0, 1, 0, 2, 1, 1];
        let qb = vec![1, 0, 2, 1, 0];
        let qc = vec![0, 0, 1, 2, 1, 1, 2];
        let a = random_blocked(&mut rng, &qa, &qb);
        let b = random_blocked(&mut rng, &qb, &qc);
        let fast = blocked_matmul(a.view(), &qa, &qb, b.view(), &qc);
        let dense = matmul(a.view(), b.view());
        let err = (&fast - &dense).iter().map(|x| x.norm()).fold(0.0, f64::max);
        assert!(err < 1e-14, "blocked product deviates by {err}");
    }

    #[test]
    fn blocked_svd_reconstructs_without_truncation() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let row_q = vec![0, 0, 1, 1, 1, 2, 2];
        let col_q = vec![0, 1, 1, 2, 2, 2, 0, 1];
        let theta = random_blocked(&mut rng, &row_q, &col_q);
        let res = blocked_svd(theta.view(), &row_q, &col_q, &TruncationSpec::exact());
        assert!(res.discarded_weight < 1e-24);
        // U Σ V† == Θ
        let mut us = res.u.clone();
        for (j, &s) in res.sigma.iter().enumerate() {
            for r in 0..us.nrows() {
                us[[r, j]] *= C64::new(s, 0.0);
            }
        }
        let rec = matmul(us.view(), res.vh.view());
        let err = (&rec - &theta).iter().map(|x| x.norm()).fold(0.0, f64::max);
        assert!(err < 1e-12, "reconstruction error {err}");
        // isometries
        let utu = matmul(res.u.t().mapv(|x| x.conj()).view(), res.u.view());
        let vvt = matmul(res.vh.view(), res.vh.t().mapv(|x| x.conj()).view());
        for i in 0..utu.nrows() {
            for j in 0..utu.ncols() {
                let t = if i == j { 1.0 } else { 0.0 };
                assert!((utu[[i, j]] - C64::new(t, 0.0)).norm() < 1e-13);
                assert!((vvt[[i, j]] - C64::new(t, 0.0)).norm() < 1e-13);
            }
        }
        // charge consistency of factors: U rows follow row_q, V† cols follow col_q
        for (r, &qr) in row_q.iter().enumerate() {
            for (k, &qk) in res.bond_charges.iter().enumerate() {
                if qr != qk {
                    assert_eq!(res.u[[r, k]], C64::new(0.0, 0.0));
                }
            }
        }
        for (c, &qc) in col_q.iter().enumerate() {
            for (k, &qk) in res.bond_charges.iter().enumerate() {
                if qc != qk {
                    assert_eq!(res.vh[[k, c]], C64::new(0.0, 0.0));
                }
            }
        }
    }

    #[test]
    fn truncation_keeps_largest_values() {
        // Diagonal matrix with known singular values across two charges.
        let row_q = vec![0, 0, 1, 1];
        let col_q = vec![0, 0, 1, 1];
        let mut theta = Array2::<C64>::zeros((4, 4));
        theta[[0, 0]] = C64::new(2.0, 0.0);
        theta[[1, 1]] = C64::new(0.5, 0.0);
        theta[[2, 2]] = C64::new(1.0, 0.0);
        theta[[3, 3]] = C64::new(0.1, 0.0);
        let res = blocked_svd(
            theta.view(),
            &row_q,
            &col_q,
            &TruncationSpec {
                m_max: 2,
                weight_cutoff: 0.0,
            },
        );
        let mut kept = res.sigma.clone();
        kept.sort_by(|a, b| b.partial_cmp(a).unwrap());
        assert_eq!(kept.len(), 2);
        assert!((kept[0] - 2.0).abs() < 1e-14);
        assert!((kept[1] - 1.0).abs() < 1e-14);
        let total: f64 = [4.0, 0.25, 1.0, 0.01].iter().sum();
        let expect_disc = (0.25 + 0.01) / total;
        assert!((res.discarded_weight - expect_disc).abs() < 1e-12);
    }

    #[test]
    fn weight_cutoff_trims_tail() {
        let row_q = vec![0, 0, 0];
        let col_q = vec![0, 0, 0];
        let mut theta = Array2::<C64>::zeros((3, 3));
        theta[[0, 0]] = C64::new(1.0, 0.0);
        theta[[1, 1]] = C64::new(1e-6, 0.0);
        theta[[2, 2]] = C64::new(1e-9, 0.0);
        let res = blocked_svd(
            theta.view(),
            &row_q,
            &col_q,
            &TruncationSpec {
                m_max: 10,
                weight_cutoff: 1e-10,
            },
        );
        // weights: 1, 1e-12, 1e-18 → the two smallest fit in the 1e-10 budget
        assert_eq!(res.sigma.len(), 1);
        assert!((res.sigma[0] - 1.0).abs() < 1e-14);
    }
}
