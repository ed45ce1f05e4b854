//! Matrix-product-state backend with particle-number bookkeeping.
//!
//! States are stored in the Schmidt (Vidal) gauge: right-isometric site
//! tensors B_i = Γ_i·λ_{i+1} of shape (left bond, physical, right bond),
//! plus the Schmidt spectrum λ at every bond, so the full state is the plain
//! product B_0·B_1⋯B_{N−1} and canonical data is available at every cut
//! simultaneously. Every bond basis vector carries the particle count to its
//! left; tensor entries outside the charge-allowed pattern are exact zeros,
//! which both enforces number conservation structurally and lets the heavy
//! kernels run block-by-block (see [`charge`]).

pub mod charge;
mod dmrg;
mod tebd;

pub use dmrg::{ground_state_mps, ground_state_mps_with, DmrgOptions};
pub use tebd::{tebd_evolve, GateOp, GateParity, TrotterPlan};

use ndarray::{Array2, Array3};
use num_complex::Complex;
use thiserror::Error;

use crate::exact::FockBasis;
use crate::lattice::LatticeParams;
use crate::linalg::{matmul, matmul_into, LinalgError};
use crate::observables::SiteProfile;
use crate::scalar::Scalar;
use charge::{blocked_matmul, blocked_svd, fuse_bond_phys, fuse_phys_bond, TruncationSpec};

#[derive(Debug, Error)]
pub enum MpsError {
    #[error("variational sweep did not converge: last sweep energies {last:?}")]
    NoConvergence { last: [f64; 2] },
    #[error("cumulative discarded weight {cumulative:.3e} exceeds the abort threshold {threshold:.3e}; bond dimension too small")]
    TruncationOverflow { cumulative: f64, threshold: f64 },
    #[error("pulse grid does not match the plan grid")]
    GridMismatch,
    #[error(transparent)]
    BadPulse(#[from] crate::pulse::GridError),
    #[error(transparent)]
    Lattice(#[from] crate::lattice::LatticeError),
    #[error("linear algebra failure: {0}")]
    Linalg(#[from] LinalgError),
    #[error("evaluation wall-clock budget exceeded after {steps} steps")]
    TimeBudget { steps: usize },
    #[error("invalid request: {0}")]
    Invalid(String),
}

/// Record of SVD truncation over an evolution.
#[derive(Debug, Clone)]
pub struct TruncationLog<T> {
    /// Relative discarded weight summed over the gates of each step.
    pub per_step: Vec<T>,
    /// Total over all steps.
    pub cumulative: T,
    /// Worst single gate.
    pub max_single_gate: T,
}

impl<T: Scalar> Default for TruncationLog<T> {
    fn default() -> Self {
        Self {
            per_step: Vec::new(),
            cumulative: T::zero(),
            max_single_gate: T::zero(),
        }
    }
}

/// Matrix product state in the Schmidt gauge.
#[derive(Debug, Clone)]
pub struct MpsState<T: Scalar> {
    /// Right-isometric site tensors (χ_left, d, χ_right).
    pub(crate) tensors: Vec<Array3<Complex<T>>>,
    /// Schmidt values per bond; lambdas[0] and lambdas[N] are [1].
    pub(crate) lambdas: Vec<Vec<T>>,
    /// Particle count left of each bond, per bond basis vector.
    pub(crate) bond_charges: Vec<Vec<i64>>,
    pub(crate) local_dim: usize,
    pub truncation_log: TruncationLog<T>,
}

impl<T: Scalar> MpsState<T> {
    /// Product Fock state |occ_0, occ_1, …⟩; all bond dimensions are 1.
    pub fn product(local_dim: usize, occ: &[u8]) -> Self {
        let n = occ.len();
        assert!(n >= 2, "need at least two sites");
        let mut tensors = Vec::with_capacity(n);
        let mut bond_charges = Vec::with_capacity(n + 1);
        let mut acc = 0i64;
        bond_charges.push(vec![0]);
        for &o in occ {
            assert!((o as usize) < local_dim, "occupation exceeds local space");
            let mut t = Array3::zeros((1, local_dim, 1));
            t[[0, o as usize, 0]] = Complex::new(T::one(), T::zero());
            tensors.push(t);
            acc += o as i64;
            bond_charges.push(vec![acc]);
        }
        Self {
            tensors,
            lambdas: vec![vec![T::one()]; n + 1],
            bond_charges,
            local_dim,
            truncation_log: TruncationLog::default(),
        }
    }

    /// Balanced product state for `params` (atoms spread as evenly as the
    /// integer filling allows).
    pub fn balanced_product(params: &LatticeParams) -> Self {
        let occ = balanced_occupations(params.n_sites, params.n_atoms(), params.n_max);
        Self::product(params.local_dim(), &occ)
    }

    pub fn n_sites(&self) -> usize {
        self.tensors.len()
    }

    pub fn local_dim(&self) -> usize {
        self.local_dim
    }

    pub fn tensor(&self, site: usize) -> &Array3<Complex<T>> {
        &self.tensors[site]
    }

    /// Schmidt spectrum at bond b (left of site b).
    pub fn lambda(&self, bond: usize) -> &[T] {
        &self.lambdas[bond]
    }

    pub fn bond_charge(&self, bond: usize) -> &[i64] {
        &self.bond_charges[bond]
    }

    pub fn bond_dims(&self) -> Vec<usize> {
        (0..=self.n_sites())
            .map(|b| self.lambdas[b].len())
            .collect()
    }

    pub fn max_bond_dim(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    /// Total particle number carried by the charge labels (structural, not a
    /// floating-point expectation).
    pub fn total_charge(&self) -> i64 {
        self.bond_charges[self.n_sites()][0]
    }

    /// Largest tensor entry outside the charge-allowed block pattern. Exact
    /// zero for any state produced by this module.
    pub fn charge_violation(&self) -> T {
        let mut worst = T::zero();
        for (i, t) in self.tensors.iter().enumerate() {
            let (chi_l, d, chi_r) = t.dim();
            for a in 0..chi_l {
                for n in 0..d {
                    for b in 0..chi_r {
                        let allowed = self.bond_charges[i][a] + n as i64
                            == self.bond_charges[i + 1][b];
                        if !allowed {
                            worst = worst.max(t[[a, n, b]].norm());
                        }
                    }
                }
            }
        }
        worst
    }

    /// Worst deviation of any site tensor from exact right isometry,
    /// max |Σ_n B[n]B[n]† − I|.
    pub fn right_isometry_residual(&self) -> T {
        let mut worst = T::zero();
        for t in &self.tensors {
            let (chi_l, d, chi_r) = t.dim();
            let m = t.view().into_shape_with_order((chi_l, d * chi_r)).unwrap();
            let g = matmul(m.view(), m.t().mapv(|x| x.conj()).view());
            for i in 0..chi_l {
                for j in 0..chi_l {
                    let target = if i == j { T::one() } else { T::zero() };
                    worst = worst.max((g[[i, j]] - Complex::new(target, T::zero())).norm());
                }
            }
        }
        worst
    }

    /// Worst deviation of the λ-weighted left contraction from diag(λ_{i+1}²),
    /// the inverse-free left-isometry condition of the Schmidt gauge.
    pub fn left_canonical_residual(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.n_sites() {
            let t = &self.tensors[i];
            let (chi_l, d, chi_r) = t.dim();
            let mut g = Array2::<Complex<T>>::zeros((chi_r, chi_r));
            for a in 0..chi_l {
                let w = self.lambdas[i][a] * self.lambdas[i][a];
                for n in 0..d {
                    for b1 in 0..chi_r {
                        let left = t[[a, n, b1]].conj() * Complex::new(w, T::zero());
                        if left.norm_sqr() == T::zero() {
                            continue;
                        }
                        for b2 in 0..chi_r {
                            g[[b1, b2]] += left * t[[a, n, b2]];
                        }
                    }
                }
            }
            for b1 in 0..chi_r {
                for b2 in 0..chi_r {
                    let target = if b1 == b2 {
                        self.lambdas[i + 1][b1] * self.lambdas[i + 1][b1]
                    } else {
                        T::zero()
                    };
                    worst = worst.max((g[[b1, b2]] - Complex::new(target, T::zero())).norm());
                }
            }
        }
        worst
    }

    /// Norm of the state (1 for canonical states).
    pub fn norm(&self) -> T {
        let mid = self.n_sites() / 2;
        self.lambdas[mid]
            .iter()
            .map(|&s| s * s)
            .fold(T::zero(), |a, b| a + b)
            .sqrt()
    }

    /// |⟨self|other⟩| via the transfer contraction.
    pub fn overlap(&self, other: &Self) -> T {
        assert_eq!(self.n_sites(), other.n_sites());
        assert_eq!(self.local_dim, other.local_dim);
        let zero = Complex::new(T::zero(), T::zero());
        let one = Complex::new(T::one(), T::zero());
        let mut env = Array2::<Complex<T>>::from_elem((1, 1), one);
        for i in 0..self.n_sites() {
            let ta = &self.tensors[i];
            let tb = &other.tensors[i];
            let (al, d, ar) = ta.dim();
            let (_, _, br) = tb.dim();
            let mut next = Array2::<Complex<T>>::zeros((ar, br));
            for n in 0..d {
                let tb_n = tb.index_axis(ndarray::Axis(1), n);
                let mut tmp = Array2::<Complex<T>>::zeros((al, br));
                matmul_into(one, env.view(), tb_n, zero, tmp.view_mut());
                let ta_conj = ta.index_axis(ndarray::Axis(1), n).mapv(|x| x.conj());
                matmul_into(one, ta_conj.t(), tmp.view(), one, next.view_mut());
            }
            env = next;
        }
        env[[0, 0]].norm()
    }

    /// Amplitudes over a number-conserving Fock basis, ordered like the
    /// exact engine's state vectors (oracle comparisons; keep N small).
    pub fn to_state_vector(&self, basis: &FockBasis) -> Vec<Complex<T>> {
        assert_eq!(basis.n_sites, self.n_sites());
        assert!(basis.n_max < self.local_dim);
        let mut out = Vec::with_capacity(basis.len());
        for s in 0..basis.len() {
            let occ = basis.state(s);
            let mut row =
                Array2::<Complex<T>>::from_elem((1, 1), Complex::new(T::one(), T::zero()));
            for (i, &n) in occ.iter().enumerate() {
                let slice = self.tensors[i].index_axis(ndarray::Axis(1), n as usize);
                row = matmul(row.view(), slice);
            }
            out.push(row[[0, 0]]);
        }
        out
    }

    /// Per-site ⟨n_i⟩, ⟨Δn_i²⟩ and the energy ⟨H(ratio)⟩ of the state.
    pub fn expectations(
        &self,
        params: &LatticeParams,
        ratio: f64,
    ) -> Result<(SiteProfile<T>, T), MpsError> {
        params.validate()?;
        assert_eq!(params.n_sites, self.n_sites());
        let d = self.local_dim;
        let n = self.n_sites();

        let mut occupations = Vec::with_capacity(n);
        let mut fluctuations = Vec::with_capacity(n);
        for i in 0..n {
            let rho = self.site_rdm(i);
            let mut m1 = T::zero();
            let mut m2 = T::zero();
            for k in 0..d {
                let p = rho[[k, k]].re;
                let kf = T::from_f64_lit(k as f64);
                m1 += p * kf;
                m2 += p * kf * kf;
            }
            occupations.push(m1);
            fluctuations.push(m2 - m1 * m1);
        }

        let terms = crate::lattice::hamiltonian_terms::<T>(params, ratio)?;
        let mut energy = T::zero();
        for bond in 1..n {
            let h = terms.bond_generator_complex(bond, n);
            let theta = self.two_site_theta(bond - 1);
            let (chi_l, _, chi_r) = theta.dim();
            let mut htheta = Array3::<Complex<T>>::zeros(theta.dim());
            for a in 0..chi_l {
                let th_a = theta.index_axis(ndarray::Axis(0), a);
                let mut out_a = htheta.index_axis_mut(ndarray::Axis(0), a);
                matmul_into(
                    Complex::new(T::one(), T::zero()),
                    h.view(),
                    th_a,
                    Complex::new(T::zero(), T::zero()),
                    out_a.view_mut(),
                );
            }
            let mut acc = Complex::new(T::zero(), T::zero());
            for a in 0..chi_l {
                for g in 0..d * d {
                    for b in 0..chi_r {
                        acc += theta[[a, g, b]].conj() * htheta[[a, g, b]];
                    }
                }
            }
            energy += acc.re;
        }

        Ok((
            SiteProfile {
                occupations,
                fluctuations,
                filling: params.filling,
            },
            energy,
        ))
    }

    /// Single-site reduced density matrix ρ[n, n'].
    fn site_rdm(&self, site: usize) -> Array2<Complex<T>> {
        let t = &self.tensors[site];
        let (chi_l, d, chi_r) = t.dim();
        let mut rho = Array2::<Complex<T>>::zeros((d, d));
        for a in 0..chi_l {
            let w = self.lambdas[site][a] * self.lambdas[site][a];
            for n1 in 0..d {
                for n2 in 0..d {
                    let mut acc = Complex::new(T::zero(), T::zero());
                    for b in 0..chi_r {
                        acc += t[[a, n1, b]] * t[[a, n2, b]].conj();
                    }
                    rho[[n1, n2]] += acc * Complex::new(w, T::zero());
                }
            }
        }
        rho
    }

    /// λ-weighted two-site wavefunction Θ at (site, site+1), shaped
    /// (χ_left, d², χ_right).
    pub(crate) fn two_site_theta(&self, site: usize) -> Array3<Complex<T>> {
        let d = self.local_dim;
        let bl = &self.tensors[site];
        let br = &self.tensors[site + 1];
        let (chi_l, _, chi_c) = bl.dim();
        let (_, _, chi_r) = br.dim();
        let bl_mat = bl.view().into_shape_with_order((chi_l * d, chi_c)).unwrap();
        let br_mat = br.view().into_shape_with_order((chi_c, d * chi_r)).unwrap();
        let row_q = fuse_bond_phys(&self.bond_charges[site], d);
        let col_q = fuse_phys_bond(d, &self.bond_charges[site + 2]);
        let phi = blocked_matmul(
            bl_mat,
            &row_q,
            &self.bond_charges[site + 1],
            br_mat,
            &col_q,
        );
        let mut theta = phi.into_shape_with_order((chi_l, d * d, chi_r)).unwrap();
        for a in 0..chi_l {
            let w = self.lambdas[site][a];
            for g in 0..d * d {
                for b in 0..chi_r {
                    let v = theta[[a, g, b]];
                    theta[[a, g, b]] = Complex::new(v.re * w, v.im * w);
                }
            }
        }
        theta
    }

    /// Restore exact canonical structure: a left-to-right isometrization
    /// sweep followed by a right-to-left Schmidt-extraction sweep; both are
    /// blocked SVD passes without inverses. Renormalizes the state.
    pub fn recanonicalize(&mut self) {
        self.to_left_isometric();
        self.extract_schmidt_sweep(usize::MAX, T::zero());
    }

    /// Truncate every bond to at most `m_new`, returning the compressed
    /// state and its exact fidelity |⟨compressed|original⟩| to the input.
    pub fn compress(&self, m_new: usize) -> (Self, T) {
        assert!(m_new >= 1);
        if self.max_bond_dim() <= m_new {
            return (self.clone(), T::one());
        }
        let mut out = self.clone();
        out.to_left_isometric();
        out.extract_schmidt_sweep(m_new, T::zero());
        let fidelity = out.overlap(self);
        (out, fidelity)
    }

    /// Convert in place to the all-left-isometric gauge. λ entries are left
    /// untouched and must be rebuilt by [`Self::extract_schmidt_sweep`].
    fn to_left_isometric(&mut self) {
        let n = self.n_sites();
        let d = self.local_dim;
        let one = Complex::new(T::one(), T::zero());
        let mut carry = Array2::<Complex<T>>::from_elem((1, 1), one);
        let mut carry_q: Vec<i64> = vec![0];
        for i in 0..n {
            let (chi_l, _, chi_r) = self.tensors[i].dim();
            let t_mat = self.tensors[i]
                .view()
                .into_shape_with_order((chi_l, d * chi_r))
                .unwrap()
                .to_owned();
            let t_col_q = fuse_phys_bond(d, &self.bond_charges[i + 1]);
            let m = blocked_matmul(
                carry.view(),
                &carry_q,
                &self.bond_charges[i],
                t_mat.view(),
                &t_col_q,
            );
            let chi_p = m.nrows();
            let m2 = m.into_shape_with_order((chi_p * d, chi_r)).unwrap();
            let row_q = fuse_bond_phys(&carry_q, d);
            self.bond_charges[i] = carry_q.clone();
            if i + 1 == n {
                let nrm = m2
                    .iter()
                    .map(|x| x.norm_sqr())
                    .fold(T::zero(), |a, b| a + b)
                    .sqrt();
                let inv = if nrm > T::zero() { T::one() / nrm } else { T::one() };
                self.tensors[i] = m2
                    .mapv(|x| Complex::new(x.re * inv, x.im * inv))
                    .into_shape_with_order((chi_p, d, chi_r))
                    .unwrap();
            } else {
                let res = blocked_svd(
                    m2.view(),
                    &row_q,
                    &self.bond_charges[i + 1],
                    &TruncationSpec::exact(),
                );
                let k = res.sigma.len();
                self.tensors[i] = res.u.into_shape_with_order((chi_p, d, k)).unwrap();
                let mut sv = res.vh;
                for (r, &s) in res.sigma.iter().enumerate() {
                    for c in 0..sv.ncols() {
                        let v = sv[[r, c]];
                        sv[[r, c]] = Complex::new(v.re * s, v.im * s);
                    }
                }
                carry = sv;
                carry_q = res.bond_charges;
                self.bond_charges[i + 1] = carry_q.clone();
            }
        }
    }

    /// Right-to-left Schmidt extraction from the all-left-isometric gauge:
    /// per bond, G = A_i·diag(λ_{i+1}) is decomposed, V† becomes the new
    /// right-isometric tensor, Σ the bond spectrum, and U rotates into the
    /// previous site. `m_cap`/`weight_cutoff` control truncation.
    fn extract_schmidt_sweep(&mut self, m_cap: usize, weight_cutoff: T) {
        let n = self.n_sites();
        let d = self.local_dim;
        let trunc = TruncationSpec {
            m_max: m_cap,
            weight_cutoff,
        };
        self.lambdas[n] = vec![T::one()];
        self.lambdas[0] = vec![T::one()];
        for i in (1..n).rev() {
            let (chi_l, _, chi_r) = self.tensors[i].dim();
            let mut g = self.tensors[i].clone();
            for b in 0..chi_r {
                let s = self.lambdas[i + 1][b];
                for a in 0..chi_l {
                    for nn in 0..d {
                        let v = g[[a, nn, b]];
                        g[[a, nn, b]] = Complex::new(v.re * s, v.im * s);
                    }
                }
            }
            let g_mat = g.into_shape_with_order((chi_l, d * chi_r)).unwrap();
            let col_q = fuse_phys_bond(d, &self.bond_charges[i + 1]);
            let res = blocked_svd(g_mat.view(), &self.bond_charges[i], &col_q, &trunc);
            let k = res.sigma.len();
            self.tensors[i] = res.vh.into_shape_with_order((k, d, chi_r)).unwrap();
            let total: T = res
                .sigma
                .iter()
                .map(|&s| s * s)
                .fold(T::zero(), |a, b| a + b);
            let inv = if total > T::zero() {
                T::one() / total.sqrt()
            } else {
                T::one()
            };
            self.lambdas[i] = res.sigma.iter().map(|&s| s * inv).collect();
            let (pl, _, pr) = self.tensors[i - 1].dim();
            debug_assert_eq!(pr, chi_l);
            let prev = self.tensors[i - 1]
                .view()
                .into_shape_with_order((pl * d, pr))
                .unwrap()
                .to_owned();
            let prev_row_q = fuse_bond_phys(&self.bond_charges[i - 1], d);
            let upd = blocked_matmul(
                prev.view(),
                &prev_row_q,
                &self.bond_charges[i],
                res.u.view(),
                &res.bond_charges,
            );
            self.tensors[i - 1] = upd.into_shape_with_order((pl, d, k)).unwrap();
            self.bond_charges[i] = res.bond_charges;
        }
        // The leftmost tensor closes the gauge: B_0 = A_0·diag(λ_1), whose
        // Frobenius norm is ‖λ_1‖ = 1 for a normalized state.
        {
            let (a0, d0, b0) = self.tensors[0].dim();
            debug_assert_eq!(a0, 1);
            let lam = if n >= 2 { self.lambdas[1].clone() } else { vec![T::one()] };
            debug_assert_eq!(lam.len(), b0);
            for b in 0..b0 {
                let s = lam[b];
                for nn in 0..d0 {
                    let v = self.tensors[0][[0, nn, b]];
                    self.tensors[0][[0, nn, b]] = Complex::new(v.re * s, v.im * s);
                }
            }
        }
        let nrm = self.tensors[0]
            .iter()
            .map(|x| x.norm_sqr())
            .fold(T::zero(), |a, b| a + b)
            .sqrt();
        if nrm > T::zero() {
            let inv = T::one() / nrm;
            self.tensors[0].mapv_inplace(|x| Complex::new(x.re * inv, x.im * inv));
        }
    }

    /// Assemble a state from raw tensors with charge labels; the result is
    /// immediately recanonicalized. Used by the DMRG driver.
    pub(crate) fn from_parts(
        tensors: Vec<Array3<Complex<T>>>,
        bond_charges: Vec<Vec<i64>>,
        local_dim: usize,
    ) -> Self {
        let n = tensors.len();
        let mut state = Self {
            tensors,
            lambdas: vec![vec![T::one()]; n + 1],
            bond_charges,
            local_dim,
            truncation_log: TruncationLog::default(),
        };
        state.recanonicalize();
        state
    }
}

/// Atoms spread as evenly as possible: `n_atoms = q·N + r` puts q+1 on the
/// first r sites.
pub fn balanced_occupations(n_sites: usize, n_atoms: usize, n_max: usize) -> Vec<u8> {
    let q = n_atoms / n_sites;
    let r = n_atoms % n_sites;
    (0..n_sites)
        .map(|i| {
            let v = q + usize::from(i < r);
            assert!(v <= n_max, "filling exceeds the local cutoff");
            v as u8
        })
        .collect()
}
