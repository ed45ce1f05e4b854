//! 1D Bose-Hubbard model: parameters, local Hamiltonian terms, and the
//! calibrated map between optical-lattice depth and the hopping ratio.
//!
//! Energies are measured in units of the on-site interaction U (fixed to 1),
//! times in ħ/U. The dynamical control variable is the dimensionless hopping
//! ratio J/U; the lattice depth V/Eᵣ is a derived display scale related to it
//! by a monotone log-linear calibration through two anchor points.

use ndarray::Array2;
use num_complex::Complex;
use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

/// Calibration anchors: (V/Eᵣ, J/U) at the shallow and deep ends of the
/// modeled ramp window.
pub const DEPTH_ANCHOR_SHALLOW: (f64, f64) = (2.0, 0.52);
pub const DEPTH_ANCHOR_DEEP: (f64, f64) = (22.0, 2.4e-3);

/// Validity window of the depth scale; values outside only warn.
pub const DEPTH_WINDOW: (f64, f64) = (2.0, 22.0);

#[derive(Debug, Error, PartialEq)]
pub enum LatticeError {
    #[error("invalid lattice parameters: {0}")]
    InvalidParams(String),
    #[error("hopping ratio must be positive, got {0}")]
    NonPositiveRatio(f64),
    #[error("lattice depth must be positive, got {0}")]
    NonPositiveDepth(f64),
}

/// Static parameters of the Bose-Hubbard chain.
///
/// `interaction` is the unit of energy and stays at 1; it is kept as a field
/// so that assembled term coefficients spell out their U dependence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeParams {
    /// Number of lattice sites N.
    pub n_sites: usize,
    /// Trap curvature Ω in units of U per site²; 0 = homogeneous chain.
    pub trap_curvature: f64,
    /// On-site interaction U (the energy unit; 1 by convention).
    pub interaction: f64,
    /// Local occupation cutoff: site dimension is n_max + 1.
    pub n_max: usize,
    /// Mean atoms per site; filling · n_sites must be an integer.
    pub filling: Ratio<i64>,
}

impl LatticeParams {
    /// Homogeneous chain at unit filling with the default cutoff of 4.
    pub fn homogeneous(n_sites: usize) -> Self {
        Self {
            n_sites,
            trap_curvature: 0.0,
            interaction: 1.0,
            n_max: 4,
            filling: Ratio::new(1, 1),
        }
    }

    /// Trapped chain with the stand-in curvature Ω = 4U/N² (trap energy at
    /// the chain edge comparable to U).
    pub fn trapped(n_sites: usize) -> Self {
        let mut p = Self::homogeneous(n_sites);
        p.trap_curvature = 4.0 / (n_sites as f64 * n_sites as f64);
        p
    }

    pub fn with_n_max(mut self, n_max: usize) -> Self {
        self.n_max = n_max;
        self
    }

    pub fn validate(&self) -> Result<(), LatticeError> {
        if self.n_sites < 2 {
            return Err(LatticeError::InvalidParams(format!(
                "n_sites must be at least 2, got {}",
                self.n_sites
            )));
        }
        if self.n_max < 2 {
            return Err(LatticeError::InvalidParams(format!(
                "n_max must be at least 2, got {}",
                self.n_max
            )));
        }
        if self.trap_curvature < 0.0 {
            return Err(LatticeError::InvalidParams(format!(
                "trap_curvature must be nonnegative, got {}",
                self.trap_curvature
            )));
        }
        if self.interaction <= 0.0 {
            return Err(LatticeError::InvalidParams(
                "interaction must be positive".into(),
            ));
        }
        let atoms = self.filling * Ratio::from_integer(self.n_sites as i64);
        if !atoms.is_integer() || *atoms.numer() < 0 {
            return Err(LatticeError::InvalidParams(format!(
                "filling {} times n_sites {} is not a nonnegative integer",
                self.filling, self.n_sites
            )));
        }
        Ok(())
    }

    /// Total atom number filling · n_sites.
    pub fn n_atoms(&self) -> usize {
        let atoms = self.filling * Ratio::from_integer(self.n_sites as i64);
        atoms.to_integer() as usize
    }

    /// Local (single-site) Hilbert space dimension n_max + 1.
    pub fn local_dim(&self) -> usize {
        self.n_max + 1
    }

    /// Trap energy coefficient Ω·(j − N/2)² at 1-based site j.
    pub fn trap_energy(&self, site: usize) -> f64 {
        let j = site as f64;
        let half = self.n_sites as f64 / 2.0;
        self.trap_curvature * (j - half) * (j - half)
    }

    /// Diagonal single-site energy for occupation n at 1-based site j:
    /// Ω(j − N/2)²·n + (U/2)(n² − n).
    pub fn site_energy(&self, site: usize, n: usize) -> f64 {
        let nf = n as f64;
        self.trap_energy(site) * nf + 0.5 * self.interaction * (nf * nf - nf)
    }
}

/// One point of the control trajectory, in both physical scales.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlPoint {
    /// Time in ħ/U.
    pub time: f64,
    /// Hopping ratio J/U (the optimized control).
    pub ratio: f64,
    /// Lattice depth V/Eᵣ under the calibrated map.
    pub depth: f64,
}

impl ControlPoint {
    pub fn from_ratio(time: f64, ratio: f64) -> Result<Self, LatticeError> {
        Ok(Self {
            time,
            ratio,
            depth: ratio_to_depth(ratio)?,
        })
    }
}

fn calibration() -> (f64, f64) {
    // ln(J/U) = a + b·sqrt(V/Eᵣ), fixed exactly by the two anchors.
    let (v1, r1) = DEPTH_ANCHOR_SHALLOW;
    let (v2, r2) = DEPTH_ANCHOR_DEEP;
    let b = (r2.ln() - r1.ln()) / (v2.sqrt() - v1.sqrt());
    let a = r1.ln() - b * v1.sqrt();
    (a, b)
}

/// Hopping ratio J/U at lattice depth V/Eᵣ. Strictly decreasing; exact at
/// both anchors. Depths outside the validity window only log a warning.
pub fn depth_to_ratio(depth: f64) -> Result<f64, LatticeError> {
    if depth <= 0.0 {
        return Err(LatticeError::NonPositiveDepth(depth));
    }
    if depth < DEPTH_WINDOW.0 || depth > DEPTH_WINDOW.1 {
        log::warn!(
            "lattice depth {depth} outside the calibrated window [{}, {}]; extrapolating",
            DEPTH_WINDOW.0,
            DEPTH_WINDOW.1
        );
    }
    let (a, b) = calibration();
    Ok((a + b * depth.sqrt()).exp())
}

/// Inverse of [`depth_to_ratio`].
pub fn ratio_to_depth(ratio: f64) -> Result<f64, LatticeError> {
    if ratio <= 0.0 {
        return Err(LatticeError::NonPositiveRatio(ratio));
    }
    let (a, b) = calibration();
    let s = (ratio.ln() - a) / b;
    let depth = s * s;
    if depth < DEPTH_WINDOW.0 || depth > DEPTH_WINDOW.1 {
        log::warn!(
            "ratio {ratio} maps to depth {depth} outside the calibrated window; extrapolating"
        );
    }
    Ok(depth)
}

/// Matrix elements of the annihilation operator b on the truncated site
/// space: ⟨n−1|b|n⟩ = √n.
pub fn annihilation_op<T: Scalar>(local_dim: usize) -> Array2<T> {
    let mut b = Array2::zeros((local_dim, local_dim));
    for n in 1..local_dim {
        b[[n - 1, n]] = T::from_f64_lit(n as f64).sqrt();
    }
    b
}

/// Number operator diag(0, 1, …, n_max).
pub fn number_op<T: Scalar>(local_dim: usize) -> Array2<T> {
    let mut n = Array2::zeros((local_dim, local_dim));
    for k in 0..local_dim {
        n[[k, k]] = T::from_f64_lit(k as f64);
    }
    n
}

/// Local terms of the Hamiltonian at hopping ratio J/U.
#[derive(Debug, Clone)]
pub struct LocalTerms<T> {
    /// Per bond (j, j+1), 1-based j = 1..N−1: the two-site hopping operator
    /// −J(b†_j b_{j+1} + h.c.) on the d²-dimensional pair space, row-major in
    /// (n_j, n_{j+1}).
    pub bond_hopping: Vec<Array2<T>>,
    /// Per site, 1-based j = 1..N: diagonal of Ω(j−N/2)²·n + (U/2)(n²−n).
    pub site_diagonal: Vec<Vec<T>>,
    pub local_dim: usize,
}

/// Assemble the local terms of Eq. H = Σ_j [−J(b†_j b_{j+1} + h.c.)
/// + Ω(j−N/2)² n_j + (U/2)(n_j² − n_j)] on the truncated site space.
pub fn hamiltonian_terms<T: Scalar>(
    params: &LatticeParams,
    ratio: f64,
) -> Result<LocalTerms<T>, LatticeError> {
    params.validate()?;
    if ratio < 0.0 {
        return Err(LatticeError::NonPositiveRatio(ratio));
    }
    let d = params.local_dim();
    let b = annihilation_op::<T>(d);
    let j_coupling = T::from_f64_lit(ratio * params.interaction);

    // hop[(n1 n2), (n1' n2')] = −J(√(n1'+1)√n2' δ_{n1,n1'+1} δ_{n2,n2'−1} + h.c.)
    let mut hop = Array2::<T>::zeros((d * d, d * d));
    for n1 in 0..d {
        for n2 in 0..d {
            let row = n1 * d + n2;
            // b†_1 b_2 |n1', n2'⟩ contributes at n1 = n1'+1, n2 = n2'−1.
            if n1 >= 1 && n2 + 1 < d {
                let col = (n1 - 1) * d + (n2 + 1);
                let amp = b[[n1 - 1, n1]] * b[[n2, n2 + 1]];
                hop[[row, col]] = hop[[row, col]] - j_coupling * amp;
            }
            if n1 + 1 < d && n2 >= 1 {
                let col = (n1 + 1) * d + (n2 - 1);
                let amp = b[[n1, n1 + 1]] * b[[n2 - 1, n2]];
                hop[[row, col]] = hop[[row, col]] - j_coupling * amp;
            }
        }
    }

    let bond_hopping = vec![hop; params.n_sites - 1];
    let site_diagonal = (1..=params.n_sites)
        .map(|j| {
            (0..d)
                .map(|n| T::from_f64_lit(params.site_energy(j, n)))
                .collect()
        })
        .collect();

    Ok(LocalTerms {
        bond_hopping,
        site_diagonal,
        local_dim: d,
    })
}

impl<T: Scalar> LocalTerms<T> {
    /// Dense two-site gate generator for bond j (1-based): hopping plus the
    /// single-site terms split onto the bond. Interior sites contribute half
    /// of their diagonal to each adjacent bond; the chain ends assign their
    /// full diagonal to their only bond.
    pub fn bond_generator(&self, bond: usize, n_sites: usize) -> Array2<T> {
        let d = self.local_dim;
        let mut h = self.bond_hopping[bond - 1].clone();
        let half = T::from_f64_lit(0.5);
        let left_weight = if bond == 1 { T::one() } else { half };
        let right_weight = if bond == n_sites - 1 { T::one() } else { half };
        for n1 in 0..d {
            for n2 in 0..d {
                let idx = n1 * d + n2;
                h[[idx, idx]] = h[[idx, idx]]
                    + left_weight * self.site_diagonal[bond - 1][n1]
                    + right_weight * self.site_diagonal[bond][n2];
            }
        }
        h
    }

    /// Same generator as a complex matrix (for exponentiation).
    pub fn bond_generator_complex(&self, bond: usize, n_sites: usize) -> Array2<Complex<T>> {
        self.bond_generator(bond, n_sites)
            .mapv(|x| Complex::new(x, T::zero()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn validation_rejects_bad_params() {
        let mut p = LatticeParams::homogeneous(1);
        assert!(p.validate().is_err());
        p = LatticeParams::homogeneous(4);
        p.n_max = 1;
        assert!(p.validate().is_err());
        p = LatticeParams::homogeneous(4);
        p.filling = Ratio::new(1, 3);
        assert!(p.validate().is_err(), "4/3 atoms is not integral");
        p.filling = Ratio::new(1, 2);
        assert!(p.validate().is_ok(), "2 atoms on 4 sites is fine");
    }

    #[test]
    fn trap_energies_match_direct_substitution() {
        // N = 4, Ω = 0.1: per-site trap energies 0.1·(j−2)² = (0.1, 0, 0.1, 0.4).
        let mut p = LatticeParams::homogeneous(4);
        p.trap_curvature = 0.1;
        let expect = [0.1, 0.0, 0.1, 0.4];
        for (j, e) in expect.iter().enumerate() {
            assert_abs_diff_eq!(p.trap_energy(j + 1), *e, epsilon = 1e-15);
        }
    }

    #[test]
    fn two_site_matrix_matches_hand_derivation() {
        // N = 2, n_max = 2, 2 atoms, Ω = 0: in the pair basis the hopping
        // couples |11⟩ to |20⟩ and |02⟩ with amplitude −√2 J, and the
        // diagonal holds (U/2)(n²−n).
        let p = LatticeParams::homogeneous(2).with_n_max(2);
        let ratio = 0.37;
        let terms = hamiltonian_terms::<f64>(&p, ratio).unwrap();
        let h = terms.bond_generator(1, 2);
        let idx = |n1: usize, n2: usize| n1 * 3 + n2;
        let s2 = 2.0f64.sqrt();
        assert_abs_diff_eq!(h[[idx(2, 0), idx(2, 0)]], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(h[[idx(0, 2), idx(0, 2)]], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(h[[idx(1, 1), idx(1, 1)]], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(h[[idx(2, 0), idx(1, 1)]], -s2 * ratio, epsilon = 1e-15);
        assert_abs_diff_eq!(h[[idx(0, 2), idx(1, 1)]], -s2 * ratio, epsilon = 1e-15);
        assert_abs_diff_eq!(h[[idx(1, 1), idx(2, 0)]], -s2 * ratio, epsilon = 1e-15);
    }

    #[test]
    fn bond_terms_are_symmetric() {
        let p = LatticeParams::trapped(5);
        let terms = hamiltonian_terms::<f64>(&p, 0.52).unwrap();
        for bond in 1..5 {
            let h = terms.bond_generator(bond, 5);
            for i in 0..h.nrows() {
                for j in 0..h.ncols() {
                    assert!(
                        (h[[i, j]] - h[[j, i]]).abs() <= 1e-14,
                        "bond {bond} not symmetric at ({i},{j})"
                    );
                }
            }
        }
    }

    #[test]
    fn depth_map_hits_paper_anchors() {
        assert_abs_diff_eq!(depth_to_ratio(2.0).unwrap(), 0.52, epsilon = 1e-12);
        assert_abs_diff_eq!(depth_to_ratio(22.0).unwrap(), 2.4e-3, epsilon = 1e-12);
    }

    #[test]
    fn depth_map_round_trips() {
        for depth in [2.0, 5.0, 10.0, 15.0, 22.0] {
            let back = ratio_to_depth(depth_to_ratio(depth).unwrap()).unwrap();
            assert!(
                (back - depth).abs() / depth < 1e-10,
                "round trip {depth} -> {back}"
            );
        }
    }

    #[test]
    fn depth_map_is_monotone_and_covers_critical_point() {
        let mut prev = f64::INFINITY;
        let mut crossed = 0;
        let mut last_above = true;
        for i in 0..=2000 {
            let depth = 2.0 + 20.0 * i as f64 / 2000.0;
            let r = depth_to_ratio(depth).unwrap();
            assert!(r < prev, "map must be strictly decreasing");
            let above = r > 0.083;
            if above != last_above {
                crossed += 1;
                last_above = above;
            }
            prev = r;
        }
        assert_eq!(crossed, 1, "exactly one crossing of J_c/U within the window");
    }

    #[test]
    fn nonpositive_inputs_are_domain_errors() {
        assert!(depth_to_ratio(0.0).is_err());
        assert!(depth_to_ratio(-1.0).is_err());
        assert!(ratio_to_depth(0.0).is_err());
        assert!(hamiltonian_terms::<f64>(&LatticeParams::homogeneous(4), -0.1).is_err());
    }

    #[test]
    fn control_point_consistency() {
        let cp = ControlPoint::from_ratio(0.0, 0.52).unwrap();
        assert_abs_diff_eq!(cp.depth, 2.0, epsilon = 1e-9);
    }
}
