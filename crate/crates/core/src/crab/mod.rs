//! Chopped-random-basis control: pulse parameterization with randomized
//! truncated Fourier corrections, figure-of-merit evaluation through a
//! simulation backend, and Nelder-Mead direct search with halting and
//! restart logic.

mod evaluate;
mod optimize;
pub mod pulse;
pub mod simplex;

pub use evaluate::{
    DefectReference, Evaluation, EvaluationContext, FigureOfMerit, FomKind, PulseEvaluator,
};
pub use optimize::{optimize, OptimizeOptions, OptimizeOutcome, OptimizeStatus, TraceEntry};
pub use pulse::{guess_pulse, GuessKind, PulseSpec};
pub use simplex::{nelder_mead, SimplexOptions, SimplexRun, SimplexSignal, StopReason};

use thiserror::Error;

use crate::backend::BackendError;
use crate::pulse::GridError;

#[derive(Debug, Error)]
pub enum CrabError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("evaluation failed at coefficients {coefficients:?}: {source}")]
    EvaluationFailed {
        coefficients: Vec<f64>,
        source: Box<CrabError>,
    },
}
