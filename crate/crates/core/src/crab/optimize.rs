//! The CRAB optimization loop: Nelder-Mead over the correction coefficients
//! with threshold halting, budget accounting, and fresh-jitter restarts.

use serde::{Deserialize, Serialize};

use super::evaluate::{Evaluation, PulseEvaluator};
use super::pulse::PulseSpec;
use super::simplex::{nelder_mead, SimplexOptions, SimplexSignal, StopReason};
use super::CrabError;
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct OptimizeOptions<T> {
    /// Maximum number of figure-of-merit evaluations (across restarts).
    pub budget: usize,
    /// Halt as soon as an evaluation reaches ρ ≤ rho_halt.
    pub rho_halt: T,
    /// Fresh-jitter restarts allowed after simplex-spread convergence.
    pub restarts: usize,
    /// Optimize the frequency offsets jointly with the amplitudes (3M
    /// variables instead of 2M).
    pub optimize_frequencies: bool,
    /// Restart (fresh jitter) after this many evaluations without
    /// improvement of the objective, in addition to the spread rule.
    pub stall_restart: Option<usize>,
    pub simplex: SimplexOptions<T>,
}

impl<T: Scalar> OptimizeOptions<T> {
    pub fn new(budget: usize, rho_halt: T) -> Self {
        Self {
            budget,
            rho_halt,
            restarts: 3,
            optimize_frequencies: false,
            stall_restart: Some(200),
            simplex: SimplexOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizeStatus {
    /// An evaluation reached ρ ≤ rho_halt.
    HaltedAtThreshold,
    /// The evaluation budget ran out.
    BudgetExhausted,
    /// The simplex spread converged (after all restarts).
    Converged,
}

/// One recorded evaluation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceEntry<T> {
    pub index: usize,
    pub restart: usize,
    /// Optimization coordinates: [A_1..A_M, B_1..B_M] (+ jitter offsets when
    /// frequency optimization is on).
    pub coefficients: Vec<T>,
    pub defect_density: T,
    pub residual_energy_per_site: T,
    pub clamped: bool,
    /// Wall time of the evaluation in seconds; informational only and kept
    /// out of the byte-compared trace tables.
    pub wall_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct OptimizeOutcome<T> {
    pub best_spec: PulseSpec<T>,
    pub best_defect_density: T,
    pub best_residual_energy: T,
    pub trace: Vec<TraceEntry<T>>,
    pub status: OptimizeStatus,
    pub evaluations: usize,
    pub restarts_used: usize,
}

/// Nelder-Mead CRAB optimization of `initial` through `evaluator`.
///
/// The search space is the 2M vector (A_k, B_k) — 3M with jitter offsets
/// when `optimize_frequencies` is set. Jitter is drawn once per restart and
/// held fixed during a descent. The returned spec is the halting vertex
/// when the threshold fired, otherwise the vertex with the lowest objective
/// (ΔE/N) ever evaluated.
pub fn optimize<T: Scalar, E: PulseEvaluator<T>>(
    initial: &PulseSpec<T>,
    evaluator: &E,
    opts: &OptimizeOptions<T>,
) -> Result<OptimizeOutcome<T>, CrabError> {
    initial.validate()?;
    let m = initial.n_modes;
    if m == 0 {
        return Err(CrabError::Config(
            "optimization needs at least one correction mode".into(),
        ));
    }
    let dim = if opts.optimize_frequencies { 3 * m } else { 2 * m };
    if opts.budget < dim + 1 {
        return Err(CrabError::Config(format!(
            "budget {} is below the simplex size {}",
            opts.budget,
            dim + 1
        )));
    }
    if !(opts.rho_halt > T::zero()) {
        return Err(CrabError::Config("rho_halt must be positive".into()));
    }

    struct Shared<T: Scalar> {
        trace: Vec<TraceEntry<T>>,
        evaluations: usize,
        best_objective: T,
        best: Option<(PulseSpec<T>, T, T)>,
        halted: Option<(PulseSpec<T>, T, T)>,
        budget_hit: bool,
        stalled: bool,
        error: Option<CrabError>,
    }
    let mut shared = Shared::<T> {
        trace: Vec::new(),
        evaluations: 0,
        best_objective: T::infinity(),
        best: None,
        halted: None,
        budget_hit: false,
        stalled: false,
        error: None,
    };

    let spec_from_x = |base: &PulseSpec<T>, x: &[T]| -> PulseSpec<T> {
        let mut spec = base.clone();
        spec.sin_coeffs = x[0..m].to_vec();
        spec.cos_coeffs = x[m..2 * m].to_vec();
        if opts.optimize_frequencies {
            for k in 0..m {
                spec.freq_jitter[k] = base.freq_jitter[k] + x[2 * m + k];
            }
        }
        spec
    };

    let mut restarts_used = 0usize;
    let mut spread_converged_final = false;

    'restart: for restart in 0..=opts.restarts {
        restarts_used = restart;
        let base = if restart == 0 {
            initial.clone()
        } else {
            let derived = initial
                .rng_seed
                .wrapping_add((restart as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            initial.with_jitter_from_seed(derived)
        };
        let mut x0 = Vec::with_capacity(dim);
        x0.extend_from_slice(&base.sin_coeffs);
        x0.extend_from_slice(&base.cos_coeffs);
        if opts.optimize_frequencies {
            x0.extend(std::iter::repeat(T::zero()).take(m));
        }

        let mut since_improve = 0usize;
        let run = nelder_mead(&x0, &opts.simplex, |x| {
            if shared.error.is_some() {
                return SimplexSignal::Stop(T::infinity());
            }
            if shared.evaluations >= opts.budget {
                shared.budget_hit = true;
                return SimplexSignal::Stop(T::infinity());
            }
            if let Some(stall) = opts.stall_restart {
                if since_improve >= stall {
                    shared.stalled = true;
                    return SimplexSignal::Stop(T::infinity());
                }
            }
            let spec = spec_from_x(&base, x);
            let eval: Evaluation<T> = match evaluator.evaluate(&spec) {
                Ok(e) => e,
                Err(err) => {
                    shared.error = Some(CrabError::EvaluationFailed {
                        coefficients: x.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect(),
                        source: Box::new(err),
                    });
                    return SimplexSignal::Stop(T::infinity());
                }
            };
            let objective = eval.residual_energy_per_site;
            shared.trace.push(TraceEntry {
                index: shared.evaluations,
                restart,
                coefficients: x.to_vec(),
                defect_density: eval.defect_density,
                residual_energy_per_site: objective,
                clamped: eval.clamped,
                wall_seconds: eval.wall.as_secs_f64(),
            });
            shared.evaluations += 1;
            if objective < shared.best_objective {
                // A restart-relevant improvement must be material (0.1%
                // relative), otherwise micro-steps keep a stalled descent
                // alive forever.
                let material = shared.best_objective.is_infinite()
                    || objective
                        < shared.best_objective * (T::one() - T::from_f64_lit(1e-3));
                shared.best_objective = objective;
                shared.best = Some((spec.clone(), eval.defect_density, objective));
                if material {
                    since_improve = 0;
                } else {
                    since_improve += 1;
                }
            } else {
                since_improve += 1;
            }
            if eval.defect_density <= opts.rho_halt {
                shared.halted = Some((spec, eval.defect_density, objective));
                return SimplexSignal::Stop(objective);
            }
            SimplexSignal::Value(objective)
        });

        if let Some(err) = shared.error.take() {
            return Err(err);
        }
        match run.reason {
            StopReason::Signalled => {
                if shared.stalled {
                    shared.stalled = false;
                    if shared.evaluations + dim + 1 > opts.budget {
                        shared.budget_hit = true;
                        break 'restart;
                    }
                    spread_converged_final = true;
                    continue 'restart;
                }
                break 'restart;
            }
            StopReason::SpreadConverged => {
                if shared.evaluations + dim + 1 > opts.budget {
                    shared.budget_hit = true;
                    break 'restart;
                }
                spread_converged_final = true;
                continue 'restart;
            }
            StopReason::IterationCap => {
                spread_converged_final = true;
                break 'restart;
            }
        }
    }

    let status = if shared.halted.is_some() {
        OptimizeStatus::HaltedAtThreshold
    } else if shared.budget_hit || shared.evaluations >= opts.budget {
        OptimizeStatus::BudgetExhausted
    } else if spread_converged_final {
        OptimizeStatus::Converged
    } else {
        OptimizeStatus::Converged
    };

    let (best_spec, best_rho, best_obj) = shared
        .halted
        .or(shared.best)
        .ok_or_else(|| CrabError::Config("no evaluation completed within the budget".into()))?;

    Ok(OptimizeOutcome {
        best_spec,
        best_defect_density: best_rho,
        best_residual_energy: best_obj,
        trace: shared.trace,
        status,
        evaluations: shared.evaluations,
        restarts_used,
    })
}
