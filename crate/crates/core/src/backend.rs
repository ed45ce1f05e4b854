//! Shared simulation-backend interface: prepare ground states, evolve under
//! a sampled control trajectory, and measure site observables plus energy.

use std::sync::Arc;
use std::time::Instant;

use thiserror::Error;

use crate::exact::{
    self, EvolveOptions, ExactError, ExactHamiltonian, FockBasis, QuantumStateED,
};
use crate::lattice::LatticeParams;
use crate::mps::{self, DmrgOptions, MpsError, MpsState, TrotterPlan};
use crate::observables::SiteProfile;
use crate::pulse::SampledPulse;
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum BackendError {
    #[error(transparent)]
    Exact(#[from] ExactError),
    #[error(transparent)]
    Mps(#[from] MpsError),
}

/// Snapshot of a measured state.
#[derive(Debug, Clone)]
pub struct Measurement<T> {
    pub profile: SiteProfile<T>,
    /// ⟨H(ratio)⟩ at the ratio passed to `measure`.
    pub energy: T,
}

/// A simulation backend over lattice `params`.
pub trait Backend<T: Scalar>: Sync {
    type State: Clone + Send + Sync;

    fn params(&self) -> &LatticeParams;

    /// Ground state at a fixed hopping ratio.
    fn ground_state(&self, ratio: f64) -> Result<(T, Self::State), BackendError>;

    /// Propagate through the sampled pulse; `deadline` aborts a runaway
    /// evaluation.
    fn evolve(
        &self,
        state: &Self::State,
        pulse: &SampledPulse<T>,
        deadline: Option<Instant>,
    ) -> Result<Self::State, BackendError>;

    /// Site observables and energy at the given ratio.
    fn measure(&self, state: &Self::State, ratio: f64) -> Result<Measurement<T>, BackendError>;
}

impl<T: Scalar, B: Backend<T>> Backend<T> for &B {
    type State = B::State;

    fn params(&self) -> &LatticeParams {
        (**self).params()
    }

    fn ground_state(&self, ratio: f64) -> Result<(T, Self::State), BackendError> {
        (**self).ground_state(ratio)
    }

    fn evolve(
        &self,
        state: &Self::State,
        pulse: &SampledPulse<T>,
        deadline: Option<Instant>,
    ) -> Result<Self::State, BackendError> {
        (**self).evolve(state, pulse, deadline)
    }

    fn measure(&self, state: &Self::State, ratio: f64) -> Result<Measurement<T>, BackendError> {
        (**self).measure(state, ratio)
    }
}

/// Exact-diagonalization backend.
pub struct ExactBackend<T: Scalar> {
    ham: ExactHamiltonian<T>,
    evolve_opts: EvolveOptions<T>,
}

impl<T: Scalar> ExactBackend<T> {
    pub fn new(params: &LatticeParams) -> Result<Self, BackendError> {
        let basis = Arc::new(FockBasis::build(params).map_err(ExactError::from)?);
        let ham = ExactHamiltonian::build(basis, params)?;
        Ok(Self {
            ham,
            evolve_opts: EvolveOptions::default(),
        })
    }

    pub fn with_state_limit(params: &LatticeParams, limit: u64) -> Result<Self, BackendError> {
        let basis =
            Arc::new(FockBasis::build_with_limit(params, limit).map_err(ExactError::from)?);
        let ham = ExactHamiltonian::build(basis, params)?;
        Ok(Self {
            ham,
            evolve_opts: EvolveOptions::default(),
        })
    }

    pub fn hamiltonian(&self) -> &ExactHamiltonian<T> {
        &self.ham
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.ham.basis
    }
}

impl<T: Scalar> Backend<T> for ExactBackend<T> {
    type State = QuantumStateED<T>;

    fn params(&self) -> &LatticeParams {
        self.ham.params()
    }

    fn ground_state(&self, ratio: f64) -> Result<(T, Self::State), BackendError> {
        Ok(exact::ground_state(&self.ham, T::from_f64_lit(ratio))?)
    }

    fn evolve(
        &self,
        state: &Self::State,
        pulse: &SampledPulse<T>,
        deadline: Option<Instant>,
    ) -> Result<Self::State, BackendError> {
        let mut opts = self.evolve_opts.clone();
        opts.deadline = deadline;
        Ok(exact::evolve(&self.ham, state, pulse, &opts)?)
    }

    fn measure(&self, state: &Self::State, ratio: f64) -> Result<Measurement<T>, BackendError> {
        let profile = exact::expectation_density(state, self.ham.params().filling);
        let energy = self.ham.energy(state, T::from_f64_lit(ratio));
        Ok(Measurement { profile, energy })
    }
}

/// Matrix-product-state backend.
pub struct MpsBackend<T: Scalar> {
    params: LatticeParams,
    pub m_max: usize,
    pub dmrg: DmrgOptions<T>,
    /// Per-gate discarded-weight cutoff during evolution.
    pub svd_cutoff: T,
    /// Abort threshold on the cumulative discarded weight of one evolution.
    pub abort_discarded: T,
}

impl<T: Scalar> MpsBackend<T> {
    pub fn new(params: &LatticeParams, m_max: usize) -> Self {
        Self {
            params: params.clone(),
            m_max,
            dmrg: DmrgOptions::new(m_max),
            svd_cutoff: T::from_f64_lit(1e-10),
            abort_discarded: T::from_f64_lit(0.05),
        }
    }
}

impl<T: Scalar> Backend<T> for MpsBackend<T> {
    type State = MpsState<T>;

    fn params(&self) -> &LatticeParams {
        &self.params
    }

    fn ground_state(&self, ratio: f64) -> Result<(T, Self::State), BackendError> {
        Ok(mps::ground_state_mps_with(&self.params, ratio, &self.dmrg)?)
    }

    fn evolve(
        &self,
        state: &Self::State,
        pulse: &SampledPulse<T>,
        deadline: Option<Instant>,
    ) -> Result<Self::State, BackendError> {
        let mut plan = TrotterPlan::new(pulse.grid, self.m_max);
        plan.svd_cutoff = self.svd_cutoff;
        plan.abort_discarded = self.abort_discarded;
        plan.deadline = deadline;
        Ok(mps::tebd_evolve(state, &self.params, pulse, &plan)?)
    }

    fn measure(&self, state: &Self::State, ratio: f64) -> Result<Measurement<T>, BackendError> {
        let (profile, energy) = state.expectations(&self.params, ratio)?;
        Ok(Measurement { profile, energy })
    }
}
