//! Optimal control of the superfluid→Mott-insulator sweep in the 1D
//! Bose-Hubbard model.
//!
//! The crate provides:
//! - the lattice model and its control parameterization ([`lattice`]),
//! - an exact-diagonalization backend over the number-conserving Fock basis
//!   ([`exact`]),
//! - a matrix-product-state backend with variational ground-state search and
//!   second-order TEBD time evolution ([`mps`]),
//! - the chopped-random-basis control parameterization and Nelder-Mead
//!   optimization loop ([`crab`]),
//! - shared figures of merit ([`observables`]) and the backend abstraction
//!   ([`backend`]).
//!
//! All numerics are generic over the floating-point width through
//! [`scalar::Scalar`]; concrete `f64` aliases for the main types live at the
//! crate root.

pub mod backend;
pub mod crab;
pub mod exact;
pub mod lattice;
pub mod linalg;
pub mod mps;
pub mod observables;
pub mod pulse;
pub mod scalar;

pub use scalar::Scalar;

/// `f64` aliases for the commonly used types.
pub type QuantumStateED64 = exact::QuantumStateED<f64>;
pub type ExactHamiltonian64 = exact::ExactHamiltonian<f64>;
pub type MpsState64 = mps::MpsState<f64>;
pub type TrotterPlan64 = mps::TrotterPlan<f64>;
pub type PulseSpec64 = crab::PulseSpec<f64>;
pub type SampledPulse64 = pulse::SampledPulse<f64>;
pub type SiteProfile64 = observables::SiteProfile<f64>;
pub type FigureOfMerit64 = crab::FigureOfMerit<f64>;

/// `f32` aliases (reduced-precision experimentation).
pub type QuantumStateED32 = exact::QuantumStateED<f32>;
pub type MpsState32 = mps::MpsState<f32>;
pub type PulseSpec32 = crab::PulseSpec<f32>;
pub type SampledPulse32 = pulse::SampledPulse<f32>;
