//! Figure-of-merit evaluation of a pulse through a simulation backend.

use std::time::{Duration, Instant};

use num_rational::Ratio;

use super::pulse::PulseSpec;
use super::CrabError;
use crate::backend::Backend;
use crate::observables::{
    defect_density, defect_density_vs_profile, residual_energy_per_site, SiteProfile,
};
use crate::pulse::TimeGrid;
use crate::scalar::Scalar;

/// Which scalar a [`FigureOfMerit`] reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FomKind {
    ResidualEnergyPerSite,
    DefectDensity,
}

/// A named figure of merit with its measurement snapshot.
#[derive(Debug, Clone)]
pub struct FigureOfMerit<T> {
    pub kind: FomKind,
    pub value: T,
    pub auxiliary: SiteProfile<T>,
}

/// Full outcome of one pulse evaluation.
#[derive(Debug, Clone)]
pub struct Evaluation<T> {
    /// ΔE/N = (E(T) − E_G)/N against the target ground energy.
    pub residual_energy_per_site: T,
    /// ρ = (1/N)Σ|⟨n_i⟩ − reference_i|.
    pub defect_density: T,
    pub profile: SiteProfile<T>,
    /// True when the positivity floor clipped the rendered pulse.
    pub clamped: bool,
    pub wall: Duration,
}

impl<T: Scalar> Evaluation<T> {
    pub fn figure_of_merit(&self, kind: FomKind) -> FigureOfMerit<T> {
        let value = match kind {
            FomKind::ResidualEnergyPerSite => self.residual_energy_per_site,
            FomKind::DefectDensity => self.defect_density,
        };
        FigureOfMerit {
            kind,
            value,
            auxiliary: self.profile.clone(),
        }
    }
}

/// Reference against which defects are counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DefectReference {
    /// |⟨n_i⟩ − filling| (the homogeneous Mott target).
    NominalFilling,
    /// |⟨n_i⟩ − ⟨n_i⟩_ground| against the final ground state's own profile
    /// (for trapped systems with a cake-structured ground state).
    GroundProfile,
}

/// Anything that can score a pulse spec; implemented by
/// [`EvaluationContext`] and by test stand-ins.
pub trait PulseEvaluator<T: Scalar>: Sync {
    fn evaluate(&self, spec: &PulseSpec<T>) -> Result<Evaluation<T>, CrabError>;
    /// Score an already-rendered trajectory.
    fn evaluate_sampled(
        &self,
        pulse: &crate::pulse::SampledPulse<T>,
    ) -> Result<Evaluation<T>, CrabError>;
    fn n_sites(&self) -> usize;
}

/// Prepared evaluation state: the backend's ground state at c(0) (the
/// evolution always starts in the superfluid ground state) and the target
/// ground energy at c(T), both computed once and shared by every candidate
/// evaluation.
pub struct EvaluationContext<T: Scalar, B: Backend<T>> {
    backend: B,
    grid: TimeGrid<T>,
    initial: B::State,
    target_energy: T,
    target_profile: Option<Vec<T>>,
    filling: Ratio<i64>,
    /// Per-evaluation wall-clock budget.
    pub eval_budget: Option<Duration>,
}

impl<T: Scalar, B: Backend<T>> EvaluationContext<T, B> {
    /// Prepare ground-state data for pulses with the given boundary values.
    pub fn prepare(
        backend: B,
        boundary_values: (T, T),
        grid: TimeGrid<T>,
        reference: DefectReference,
    ) -> Result<Self, CrabError> {
        let c0 = boundary_values.0.to_f64().ok_or_else(|| {
            CrabError::Domain("boundary value does not convert to f64".into())
        })?;
        let c_t = boundary_values.1.to_f64().ok_or_else(|| {
            CrabError::Domain("boundary value does not convert to f64".into())
        })?;
        let (_, initial) = backend.ground_state(c0)?;
        let (target_energy, target_state) = backend.ground_state(c_t)?;
        let target_profile = match reference {
            DefectReference::NominalFilling => None,
            DefectReference::GroundProfile => {
                let m = backend.measure(&target_state, c_t)?;
                Some(m.profile.occupations)
            }
        };
        let filling = backend.params().filling;
        Ok(Self {
            backend,
            grid,
            initial,
            target_energy,
            target_profile,
            filling,
            eval_budget: None,
        })
    }

    pub fn grid(&self) -> TimeGrid<T> {
        self.grid
    }

    pub fn target_energy(&self) -> T {
        self.target_energy
    }

    pub fn backend(&self) -> &B {
        &self.backend
    }

    pub fn initial_state(&self) -> &B::State {
        &self.initial
    }

    /// Score an already-rendered trajectory (robustness re-application).
    pub fn evaluate_sampled(
        &self,
        pulse: &crate::pulse::SampledPulse<T>,
    ) -> Result<Evaluation<T>, CrabError> {
        let start = Instant::now();
        let deadline = self.eval_budget.map(|b| start + b);
        let final_state = self.backend.evolve(&self.initial, pulse, deadline)?;
        let ratio_t = pulse.end().to_f64().unwrap_or(f64::NAN);
        let m = self.backend.measure(&final_state, ratio_t)?;
        let n_sites = self.backend.params().n_sites;
        let mut profile = m.profile;
        profile.filling = self.filling;
        let rho = match &self.target_profile {
            None => defect_density(&profile),
            Some(reference) => defect_density_vs_profile(&profile, reference),
        };
        let de = residual_energy_per_site(m.energy, self.target_energy, n_sites);
        Ok(Evaluation {
            residual_energy_per_site: de,
            defect_density: rho,
            profile,
            clamped: pulse.clamped,
            wall: start.elapsed(),
        })
    }
}

impl<T: Scalar, B: Backend<T>> PulseEvaluator<T> for EvaluationContext<T, B> {
    fn evaluate(&self, spec: &PulseSpec<T>) -> Result<Evaluation<T>, CrabError> {
        let pulse = spec.render(self.grid)?;
        EvaluationContext::evaluate_sampled(self, &pulse)
    }

    fn evaluate_sampled(
        &self,
        pulse: &crate::pulse::SampledPulse<T>,
    ) -> Result<Evaluation<T>, CrabError> {
        EvaluationContext::evaluate_sampled(self, pulse)
    }

    fn n_sites(&self) -> usize {
        self.backend.params().n_sites
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::ExactBackend;
    use crate::crab::pulse::GuessKind;
    use crate::lattice::LatticeParams;

    #[test]
    fn stationary_pulse_scores_zero_residual() {
        // Constant pulse at c(T), starting from the ground state at c(T):
        // ΔE/N ≤ 1e-8 and ρ equals the ground state's own defect density.
        let params = LatticeParams::homogeneous(4);
        let backend = ExactBackend::<f64>::new(&params).unwrap();
        let grid = TimeGrid::with_step(1.0, 1e-2).unwrap();
        let ratio = 0.1;
        let ctx = EvaluationContext::prepare(
            &backend,
            (ratio, ratio),
            grid,
            DefectReference::NominalFilling,
        )
        .unwrap();
        let spec = PulseSpec::new(GuessKind::Linear, (ratio, ratio), 1.0, 0, 1);
        let eval = ctx.evaluate(&spec).unwrap();
        assert!(
            eval.residual_energy_per_site.abs() <= 1e-8,
            "ΔE/N = {}",
            eval.residual_energy_per_site
        );
        let (_, gs) = backend.ground_state(ratio).unwrap();
        let m = backend.measure(&gs, ratio).unwrap();
        let rho_gs = defect_density(&m.profile);
        assert!((eval.defect_density - rho_gs).abs() < 1e-8);
    }

    #[test]
    fn evaluations_are_deterministic_and_order_free() {
        let params = LatticeParams::homogeneous(4);
        let backend = ExactBackend::<f64>::new(&params).unwrap();
        let grid = TimeGrid::with_step(2.0, 1e-2).unwrap();
        let ctx = EvaluationContext::prepare(
            &backend,
            (0.52, 0.0024),
            grid,
            DefectReference::NominalFilling,
        )
        .unwrap();
        let mut specs = Vec::new();
        for seed in 0..4u64 {
            let mut s = PulseSpec::new(GuessKind::Exponential, (0.52, 0.0024), 2.0, 2, seed);
            s.sin_coeffs = vec![0.1 * seed as f64, -0.05];
            s.cos_coeffs = vec![0.02, 0.03 * seed as f64];
            specs.push(s);
        }
        let forward: Vec<f64> = specs
            .iter()
            .map(|s| ctx.evaluate(s).unwrap().defect_density)
            .collect();
        let backward: Vec<f64> = specs
            .iter()
            .rev()
            .map(|s| ctx.evaluate(s).unwrap().defect_density)
            .collect();
        for (i, f) in forward.iter().enumerate() {
            assert_eq!(*f, backward[specs.len() - 1 - i], "evaluation order leaked");
        }
    }
}
