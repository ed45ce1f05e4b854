//! Number-conserving exact-diagonalization backend.
//!
//! The Hamiltonian is kept as a J-independent diagonal plus a sparse hopping
//! pattern assembled once per (basis, trap) pair and rescaled by J per step,
//! so that pulse evaluation never re-walks the basis. Time propagation is a
//! Krylov matrix exponential with the midpoint control value on each step.

mod basis;

pub use basis::{BasisError, FockBasis, DEFAULT_STATE_LIMIT};

use std::sync::Arc;
use std::time::Instant;

use ndarray::Array2;
use num_complex::Complex;
use num_rational::Ratio;
use thiserror::Error;

use crate::lattice::LatticeParams;
use crate::linalg::{
    self, krylov_expmv, lanczos_lowest, HermitianOp, KrylovOptions, LanczosOptions, LinalgError,
};
use crate::observables::SiteProfile;
use crate::pulse::SampledPulse;
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum ExactError {
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error(transparent)]
    Lattice(#[from] crate::lattice::LatticeError),
    #[error("eigensolver did not converge: {0}")]
    Eigensolver(LinalgError),
    #[error("propagator failed: {0}")]
    Propagator(LinalgError),
    #[error("time step must be positive")]
    NonPositiveStep,
    #[error("pulse grid is inconsistent: {0}")]
    BadPulse(#[from] crate::pulse::GridError),
    #[error("evaluation wall-clock budget exceeded after {steps} steps")]
    TimeBudget { steps: usize },
}

/// Full state vector over a [`FockBasis`].
#[derive(Debug, Clone)]
pub struct QuantumStateED<T: Scalar> {
    pub basis: Arc<FockBasis>,
    pub amplitudes: Vec<Complex<T>>,
}

impl<T: Scalar> QuantumStateED<T> {
    /// Fock product state with the given occupations.
    pub fn fock(basis: Arc<FockBasis>, occ: &[u8]) -> Self {
        let mut amplitudes = vec![Complex::new(T::zero(), T::zero()); basis.len()];
        let idx = basis.rank(occ);
        amplitudes[idx] = Complex::new(T::one(), T::zero());
        Self { basis, amplitudes }
    }

    pub fn norm(&self) -> T {
        linalg::norm2(&self.amplitudes)
    }

    pub fn normalize(&mut self) {
        let n = self.norm();
        if n > T::zero() {
            linalg::scale(T::one() / n, &mut self.amplitudes);
        }
    }

    /// |⟨self|other⟩| (global-phase-free fidelity amplitude).
    pub fn overlap(&self, other: &Self) -> T {
        linalg::cdot(&self.amplitudes, &other.amplitudes).norm()
    }
}

/// J-independent pieces of H = diag − J·K over a basis.
#[derive(Debug)]
pub struct ExactHamiltonian<T: Scalar> {
    pub basis: Arc<FockBasis>,
    params: LatticeParams,
    /// Site-term diagonal: trap + interaction.
    diag: Vec<T>,
    /// Hopping pattern K = Σ_j (b†_j b_{j+1} + h.c.) in CSR form; all
    /// entries are +√((n+1)m) and H couples with coefficient −J.
    row_ptr: Vec<usize>,
    col: Vec<u32>,
    val: Vec<T>,
}

impl<T: Scalar> ExactHamiltonian<T> {
    pub fn build(basis: Arc<FockBasis>, params: &LatticeParams) -> Result<Self, ExactError> {
        params.validate()?;
        let dim = basis.len();
        let n_sites = basis.n_sites;
        let mut diag = Vec::with_capacity(dim);
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut col: Vec<u32> = Vec::new();
        let mut val: Vec<T> = Vec::new();
        row_ptr.push(0);
        let mut scratch = vec![0u8; n_sites];

        for i in 0..dim {
            let state = basis.state(i);
            let mut d = 0.0;
            for (j, &n) in state.iter().enumerate() {
                d += params.site_energy(j + 1, n as usize);
            }
            diag.push(T::from_f64_lit(d));

            for bond in 0..n_sites - 1 {
                let (nl, nr) = (state[bond] as usize, state[bond + 1] as usize);
                // b†_bond b_{bond+1}: moves one atom right→left.
                if nr > 0 && nl < basis.n_max {
                    scratch.copy_from_slice(state);
                    scratch[bond] += 1;
                    scratch[bond + 1] -= 1;
                    let target = basis.rank(&scratch);
                    debug_assert!(target < dim, "hop target must stay in-sector");
                    let amp = (((nl + 1) * nr) as f64).sqrt();
                    col.push(target as u32);
                    val.push(T::from_f64_lit(amp));
                }
                // b†_{bond+1} b_bond: one atom left→right.
                if nl > 0 && nr < basis.n_max {
                    scratch.copy_from_slice(state);
                    scratch[bond] -= 1;
                    scratch[bond + 1] += 1;
                    let target = basis.rank(&scratch);
                    debug_assert!(target < dim, "hop target must stay in-sector");
                    let amp = ((nl * (nr + 1)) as f64).sqrt();
                    col.push(target as u32);
                    val.push(T::from_f64_lit(amp));
                }
            }
            row_ptr.push(col.len());
        }

        Ok(Self {
            basis,
            params: params.clone(),
            diag,
            row_ptr,
            col,
            val,
        })
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn params(&self) -> &LatticeParams {
        &self.params
    }

    /// View of H at a fixed hopping ratio (J/U = `ratio`).
    pub fn at_ratio(&self, ratio: T) -> ScaledHamiltonian<'_, T> {
        ScaledHamiltonian { ham: self, ratio }
    }

    /// ⟨ψ|H(ratio)|ψ⟩ for a normalized state.
    pub fn energy(&self, state: &QuantumStateED<T>, ratio: T) -> T {
        let mut y = vec![Complex::new(T::zero(), T::zero()); self.dim()];
        self.at_ratio(ratio).apply(&state.amplitudes, &mut y);
        linalg::cdot(&state.amplitudes, &y).re
    }

    /// Dense matrix of H(ratio); intended for small test oracles.
    pub fn dense(&self, ratio: T) -> Array2<Complex<T>> {
        let dim = self.dim();
        let mut h = Array2::zeros((dim, dim));
        for i in 0..dim {
            h[[i, i]] = Complex::new(self.diag[i], T::zero());
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col[k] as usize;
                h[[i, j]] -= Complex::new(ratio * self.val[k], T::zero());
            }
        }
        h
    }
}

/// Matrix-free H(ratio) = diag − ratio·K.
pub struct ScaledHamiltonian<'a, T: Scalar> {
    ham: &'a ExactHamiltonian<T>,
    ratio: T,
}

impl<T: Scalar> HermitianOp<T> for ScaledHamiltonian<'_, T> {
    fn dim(&self) -> usize {
        self.ham.dim()
    }

    fn apply(&self, x: &[Complex<T>], y: &mut [Complex<T>]) {
        let h = self.ham;
        let j = self.ratio;
        let apply_rows = |rows: std::ops::Range<usize>, out: &mut [Complex<T>]| {
            for (slot, i) in rows.enumerate() {
                let mut acc_re = T::zero();
                let mut acc_im = T::zero();
                for k in h.row_ptr[i]..h.row_ptr[i + 1] {
                    let v = h.val[k];
                    let xc = x[h.col[k] as usize];
                    acc_re += v * xc.re;
                    acc_im += v * xc.im;
                }
                let d = h.diag[i];
                out[slot] = Complex::new(d * x[i].re - j * acc_re, d * x[i].im - j * acc_im);
            }
        };

        let dim = h.dim();
        if dim >= 32_768 {
            // Row-partitioned parallel product; per-row sums stay sequential,
            // so the result is independent of the thread count.
            use rayon::prelude::*;
            let chunk = dim.div_ceil(rayon::current_num_threads().max(1) * 4);
            y.par_chunks_mut(chunk).enumerate().for_each(|(ci, out)| {
                let start = ci * chunk;
                apply_rows(start..start + out.len(), out);
            });
        } else {
            apply_rows(0..dim, y);
        }
    }
}

/// Options for the exact propagator.
#[derive(Debug, Clone)]
pub struct EvolveOptions<T> {
    pub krylov: KrylovOptions<T>,
    /// Optional wall-clock deadline for the whole evolution.
    pub deadline: Option<Instant>,
}

impl<T: Scalar> Default for EvolveOptions<T> {
    fn default() -> Self {
        Self {
            krylov: KrylovOptions::default(),
            deadline: None,
        }
    }
}

/// Lowest eigenpair of H(ratio). The ground-state residual ‖Hψ − Eψ‖ is
/// driven below 10⁻⁹ (tighter than that by default).
pub fn ground_state<T: Scalar>(
    ham: &ExactHamiltonian<T>,
    ratio: T,
) -> Result<(T, QuantumStateED<T>), ExactError> {
    ground_state_with(ham, ratio, &LanczosOptions::default())
}

pub fn ground_state_with<T: Scalar>(
    ham: &ExactHamiltonian<T>,
    ratio: T,
    opts: &LanczosOptions<T>,
) -> Result<(T, QuantumStateED<T>), ExactError> {
    let op = ham.at_ratio(ratio);
    let (energy, vec) = lanczos_lowest(&op, None, opts).map_err(ExactError::Eigensolver)?;
    let mut state = QuantumStateED {
        basis: Arc::clone(&ham.basis),
        amplitudes: vec,
    };
    state.normalize();
    Ok((energy, state))
}

/// Propagate through the sampled pulse with one Krylov exponential per step,
/// holding the control at its midpoint value within each step.
pub fn evolve<T: Scalar>(
    ham: &ExactHamiltonian<T>,
    state: &QuantumStateED<T>,
    pulse: &SampledPulse<T>,
    opts: &EvolveOptions<T>,
) -> Result<QuantumStateED<T>, ExactError> {
    pulse.validate()?;
    if pulse.grid.n_steps == 0 {
        let mut out = state.clone();
        out.normalize();
        return Ok(out);
    }
    let dt = pulse.grid.dt();
    if dt <= T::zero() {
        return Err(ExactError::NonPositiveStep);
    }
    let mut psi = state.amplitudes.clone();
    for (step, &ratio) in pulse.midpoints.iter().enumerate() {
        if let Some(deadline) = opts.deadline {
            if step % 64 == 0 && Instant::now() > deadline {
                return Err(ExactError::TimeBudget { steps: step });
            }
        }
        let op = ham.at_ratio(ratio);
        krylov_expmv(&op, dt, &mut psi, &opts.krylov).map_err(ExactError::Propagator)?;
    }
    let mut out = QuantumStateED {
        basis: Arc::clone(&ham.basis),
        amplitudes: psi,
    };
    out.normalize();
    Ok(out)
}

/// Per-site ⟨n_i⟩ and ⟨Δn_i²⟩ of a normalized state.
pub fn expectation_density<T: Scalar>(
    state: &QuantumStateED<T>,
    filling: Ratio<i64>,
) -> SiteProfile<T> {
    let basis = &state.basis;
    let n_sites = basis.n_sites;
    let mut occ = vec![T::zero(); n_sites];
    let mut occ2 = vec![T::zero(); n_sites];
    for (i, amp) in state.amplitudes.iter().enumerate() {
        let w = amp.norm_sqr();
        if w == T::zero() {
            continue;
        }
        for (j, &n) in basis.state(i).iter().enumerate() {
            let nf = T::from_f64_lit(n as f64);
            occ[j] += w * nf;
            occ2[j] += w * nf * nf;
        }
    }
    let fluctuations = occ
        .iter()
        .zip(&occ2)
        .map(|(&m, &m2)| {
            let var = m2 - m * m;
            debug_assert!(var >= T::from_f64_lit(-1e-12), "variance must be nonnegative");
            var
        })
        .collect();
    SiteProfile {
        occupations: occ,
        fluctuations,
        filling,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LatticeParams;
    use crate::linalg::hermitian_eig;
    use crate::pulse::TimeGrid;
    use approx::assert_abs_diff_eq;

    fn setup(n: usize, n_max: usize) -> (LatticeParams, Arc<FockBasis>, ExactHamiltonian<f64>) {
        let params = LatticeParams::homogeneous(n).with_n_max(n_max);
        let basis = Arc::new(FockBasis::build(&params).unwrap());
        let ham = ExactHamiltonian::build(Arc::clone(&basis), &params).unwrap();
        (params, basis, ham)
    }

    #[test]
    fn atomic_limit_ground_state_is_unit_fock() {
        let (_, basis, ham) = setup(4, 4);
        let (e, psi) = ground_state(&ham, 0.0).unwrap();
        assert!(e.abs() < 1e-10);
        let unit = QuantumStateED::fock(basis, &[1, 1, 1, 1]);
        assert!(psi.overlap(&unit) > 1.0 - 1e-9);
    }

    #[test]
    fn two_site_ground_energy_analytic() {
        // E_G = (U − √(U² + 16 J²))/2 for N = 2, n_max = 2, Ω = 0.
        let params = LatticeParams::homogeneous(2).with_n_max(2);
        let basis = Arc::new(FockBasis::build(&params).unwrap());
        let ham = ExactHamiltonian::build(basis, &params).unwrap();
        for j in [0.1f64, 0.52, 1.3] {
            let (e, _) = ground_state(&ham, j).unwrap();
            let expect = (1.0 - (1.0 + 16.0 * j * j).sqrt()) / 2.0;
            assert_abs_diff_eq!(e, expect, epsilon = 1e-9);
        }
    }

    #[test]
    fn lanczos_matches_dense_oracle_n4() {
        let (_, _, ham) = setup(4, 4);
        let ratio = 0.52;
        let dense = ham.dense(ratio);
        let (vals, _) = hermitian_eig(&dense).unwrap();
        let (e, psi) = ground_state(&ham, ratio).unwrap();
        assert_abs_diff_eq!(e, vals[0], epsilon = 1e-9);
        // residual check
        let mut y = vec![num_complex::Complex64::new(0.0, 0.0); ham.dim()];
        ham.at_ratio(ratio).apply(&psi.amplitudes, &mut y);
        linalg::axpy(num_complex::Complex64::new(-e, 0.0), &psi.amplitudes, &mut y);
        assert!(linalg::norm2(&y) <= 1e-9);
    }

    #[test]
    fn hermiticity_and_reflection_symmetry() {
        let (_, _, ham) = setup(5, 3);
        let dense = ham.dense(0.37);
        for i in 0..ham.dim() {
            for j in 0..ham.dim() {
                assert!(
                    (dense[[i, j]] - dense[[j, i]].conj()).norm() < 1e-14,
                    "hermiticity violated at ({i},{j})"
                );
            }
        }
        // Ω = 0 spectrum must be reflection invariant: compare the lowest
        // eigenvalues against the site-reflected Hamiltonian.
        let (vals, _) = hermitian_eig(&dense).unwrap();
        let basis = Arc::clone(&ham.basis);
        let mut reflected = dense.clone();
        // site reflection permutes basis states
        let perm: Vec<usize> = (0..basis.len())
            .map(|i| {
                let mut occaug: Vec<u8> = basis.state(i).to_vec();
                occaug.reverse();
                basis.rank(&occaug)
            })
            .collect();
        for i in 0..basis.len() {
            for j in 0..basis.len() {
                reflected[[i, j]] = dense[[perm[i], perm[j]]];
            }
        }
        let (vals_r, _) = hermitian_eig(&reflected).unwrap();
        for (a, b) in vals.iter().zip(&vals_r) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
    }

    #[test]
    fn zero_duration_is_identity() {
        let (_, basis, ham) = setup(3, 3);
        let psi = QuantumStateED::fock(basis, &[1, 1, 1]);
        let grid = TimeGrid::new(1e-9, 1).unwrap();
        let pulse = SampledPulse::constant(grid, 0.3);
        let out = evolve(&ham, &psi, &pulse, &EvolveOptions::default()).unwrap();
        assert!(out.overlap(&psi) > 1.0 - 1e-12);
    }

    #[test]
    fn stationary_state_stays_put() {
        let (_, _, ham) = setup(4, 4);
        let ratio = 0.52;
        let (_, psi0) = ground_state(&ham, ratio).unwrap();
        let grid = TimeGrid::with_step(2.0, 1e-2).unwrap();
        let pulse = SampledPulse::constant(grid, ratio);
        let psi_t = evolve(&ham, &psi0, &pulse, &EvolveOptions::default()).unwrap();
        assert!(
            psi_t.overlap(&psi0) >= 1.0 - 1e-8,
            "overlap {}",
            psi_t.overlap(&psi0)
        );
    }

    #[test]
    fn energy_conserved_under_constant_control() {
        let (_, basis, ham) = setup(4, 4);
        // start away from an eigenstate
        let psi = QuantumStateED::fock(basis, &[2, 0, 1, 1]);
        let ratio = 0.4;
        let e0 = ham.energy(&psi, ratio);
        let grid = TimeGrid::with_step(5.0, 1e-2).unwrap();
        let pulse = SampledPulse::constant(grid, ratio);
        let psi_t = evolve(&ham, &psi, &pulse, &EvolveOptions::default()).unwrap();
        let e1 = ham.energy(&psi_t, ratio);
        assert_abs_diff_eq!(e0, e1, epsilon = 1e-8);
        assert_abs_diff_eq!(psi_t.norm(), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn time_reversal_returns_initial_state() {
        let (_, _, ham) = setup(4, 4);
        let (_, psi0) = ground_state(&ham, 0.52).unwrap();
        let grid = TimeGrid::with_step(1.0, 1e-3).unwrap();
        let fwd = SampledPulse::from_fn(grid, |t| 0.52 - 0.4 * t);
        let psi_t = evolve(&ham, &psi0, &fwd, &EvolveOptions::default()).unwrap();
        // Reverse: propagate with the reversed pulse and negative dt via the
        // conjugate trick: exp(+iHdt) = conj(exp(-iHdt) conj(ψ)).
        let mut conj_state = psi_t.clone();
        for a in conj_state.amplitudes.iter_mut() {
            *a = a.conj();
        }
        let back = evolve(&ham, &conj_state, &fwd.reversed(), &EvolveOptions::default()).unwrap();
        let mut recovered = back;
        for a in recovered.amplitudes.iter_mut() {
            *a = a.conj();
        }
        assert!(
            recovered.overlap(&psi0) >= 1.0 - 1e-8,
            "fidelity {}",
            recovered.overlap(&psi0)
        );
    }

    #[test]
    fn expectation_density_trivial_cases() {
        let params = LatticeParams::homogeneous(3);
        let basis = Arc::new(FockBasis::build(&params).unwrap());
        let psi = QuantumStateED::<f64>::fock(Arc::clone(&basis), &[1, 1, 1]);
        let prof = expectation_density(&psi, params.filling);
        for i in 0..3 {
            assert_abs_diff_eq!(prof.occupations[i], 1.0, epsilon = 1e-14);
            assert_abs_diff_eq!(prof.fluctuations[i], 0.0, epsilon = 1e-14);
        }

        // (|20⟩ + |02⟩)/√2 on two sites
        let params2 = LatticeParams::homogeneous(2).with_n_max(2);
        let basis2 = Arc::new(FockBasis::build(&params2).unwrap());
        let mut amp = vec![num_complex::Complex64::new(0.0, 0.0); basis2.len()];
        let r20 = basis2.rank(&[2, 0]);
        let r02 = basis2.rank(&[0, 2]);
        amp[r20] = num_complex::Complex64::new(0.5f64.sqrt(), 0.0);
        amp[r02] = num_complex::Complex64::new(0.5f64.sqrt(), 0.0);
        let psi2 = QuantumStateED {
            basis: basis2,
            amplitudes: amp,
        };
        let prof2 = expectation_density(&psi2, params2.filling);
        assert_abs_diff_eq!(prof2.occupations[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(prof2.fluctuations[0], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn norm_drift_stays_tiny_over_many_steps() {
        let (_, basis, ham) = setup(3, 3);
        let psi0 = QuantumStateED::fock(basis, &[2, 1, 0]);
        let grid = TimeGrid::new(10.0, 10_000).unwrap();
        let pulse = SampledPulse::from_fn(grid, |t: f64| 0.3 + 0.1 * (t * 0.7).sin());
        let out = evolve(&ham, &psi0, &pulse, &EvolveOptions::default()).unwrap();
        // evolve renormalizes at the end; check the raw drift by re-running
        // without normalization through the propagator pieces instead.
        let mut raw = psi0.amplitudes.clone();
        for &r in pulse.midpoints.iter() {
            krylov_expmv(&ham.at_ratio(r), grid.dt(), &mut raw, &KrylovOptions::default()).unwrap();
        }
        assert!((linalg::norm2(&raw) - 1.0).abs() <= 1e-8);
        assert!((out.norm() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn zero_step_pulse_is_identity() {
        let (_, basis, ham) = setup(3, 3);
        let psi = QuantumStateED::fock(basis, &[1, 2, 0]);
        let pulse = SampledPulse::empty(0.4);
        let out = evolve(&ham, &psi, &pulse, &EvolveOptions::default()).unwrap();
        assert!(out.overlap(&psi) == 1.0);
    }

    #[test]
    fn ground_state_nonconvergence_carries_residual() {
        let (_, _, ham) = setup(4, 4);
        let opts = LanczosOptions {
            max_basis: 2,
            max_restarts: 1,
            tol: 1e-12,
            seed: 1,
        };
        match ground_state_with(&ham, 0.52, &opts) {
            Err(ExactError::Eigensolver(
                crate::linalg::LinalgError::NoConvergence { residual, .. },
            )) => {
                assert!(residual > 0.0);
            }
            other => panic!("expected a convergence error, got {other:?}"),
        }
    }

    #[test]
    fn f32_smoke_test() {
        let params = LatticeParams::homogeneous(3).with_n_max(2);
        let basis = Arc::new(FockBasis::build(&params).unwrap());
        let ham = ExactHamiltonian::<f32>::build(Arc::clone(&basis), &params).unwrap();
        let (e, _) = ground_state_with(
            &ham,
            0.5f32,
            &LanczosOptions {
                tol: 1e-5,
                ..Default::default()
            },
        )
        .unwrap();
        let dense = ham.dense(0.5);
        let (vals, _) = hermitian_eig(&dense).unwrap();
        assert!((e - vals[0]).abs() < 1e-4);
    }
}
