//! The experiment drivers behind each CLI subcommand.

use std::path::Path;
use std::time::Duration;

use anyhow::{bail, Result};
use bhcrab::backend::{Backend, ExactBackend, MpsBackend};
use bhcrab::crab::{
    optimize, DefectReference, Evaluation, EvaluationContext, GuessKind, OptimizeOptions,
    PulseEvaluator, PulseSpec,
};
use bhcrab::lattice::{ratio_to_depth, LatticeParams};
use bhcrab::pulse::{SampledPulse, TimeGrid};
use rayon::prelude::*;

use crate::config::{BackendKind, ExperimentKind, RunConfig};
use crate::persist;
use crate::record::{PulseSamples, RunRecord, RunStatus, TruncationSummary};

/// Everything `run` leaves behind.
pub struct RunReport {
    pub record: RunRecord,
    pub status: RunStatus,
}

/// Backend-erased evaluation context.
pub enum AnyContext {
    Exact(EvaluationContext<f64, ExactBackend<f64>>),
    Mps(EvaluationContext<f64, MpsBackend<f64>>),
}

impl AnyContext {
    fn prepare(
        config: &RunConfig,
        params: &LatticeParams,
        boundaries: (f64, f64),
        grid: TimeGrid<f64>,
    ) -> Result<Self> {
        let reference = if config.defect_reference_ground {
            DefectReference::GroundProfile
        } else {
            DefectReference::NominalFilling
        };
        let budget = if config.limits.eval_timeout_seconds > 0.0 {
            Some(Duration::from_secs_f64(config.limits.eval_timeout_seconds))
        } else {
            None
        };
        match config.backend.kind {
            BackendKind::Exact => {
                let backend = ExactBackend::<f64>::with_state_limit(
                    params,
                    config.backend.max_basis_states,
                )?;
                let mut ctx = EvaluationContext::prepare(backend, boundaries, grid, reference)?;
                ctx.eval_budget = budget;
                Ok(AnyContext::Exact(ctx))
            }
            BackendKind::Mps => {
                let mut backend = MpsBackend::<f64>::new(params, config.backend.m_max);
                backend.svd_cutoff = config.backend.svd_cutoff;
                let mut ctx = EvaluationContext::prepare(backend, boundaries, grid, reference)?;
                ctx.eval_budget = budget;
                Ok(AnyContext::Mps(ctx))
            }
        }
    }

    fn ground_energy_method(&self) -> &'static str {
        match self {
            AnyContext::Exact(_) => "exact-diagonalization",
            AnyContext::Mps(_) => "dmrg",
        }
    }

    /// Evolve the prepared initial state through `pulse` one final time and
    /// collect the detailed products for the record.
    fn final_run_details(
        &self,
        pulse: &SampledPulse<f64>,
    ) -> Result<(bhcrab::observables::SiteProfile<f64>, Option<TruncationSummary>)> {
        match self {
            AnyContext::Exact(ctx) => {
                let state = ctx.backend().evolve(ctx.initial_state(), pulse, None)?;
                let m = ctx
                    .backend()
                    .measure(&state, pulse.end())?;
                Ok((m.profile, None))
            }
            AnyContext::Mps(ctx) => {
                let state = ctx.backend().evolve(ctx.initial_state(), pulse, None)?;
                let m = ctx.backend().measure(&state, pulse.end())?;
                let summary = TruncationSummary {
                    cumulative_discarded: state.truncation_log.cumulative,
                    max_single_gate: state.truncation_log.max_single_gate,
                    max_bond_dim: state.max_bond_dim(),
                };
                Ok((m.profile, Some(summary)))
            }
        }
    }
}

impl PulseEvaluator<f64> for AnyContext {
    fn evaluate(&self, spec: &PulseSpec<f64>) -> Result<Evaluation<f64>, bhcrab::crab::CrabError> {
        match self {
            AnyContext::Exact(c) => c.evaluate(spec),
            AnyContext::Mps(c) => c.evaluate(spec),
        }
    }

    fn evaluate_sampled(
        &self,
        pulse: &SampledPulse<f64>,
    ) -> Result<Evaluation<f64>, bhcrab::crab::CrabError> {
        match self {
            AnyContext::Exact(c) => c.evaluate_sampled(pulse),
            AnyContext::Mps(c) => c.evaluate_sampled(pulse),
        }
    }

    fn n_sites(&self) -> usize {
        match self {
            AnyContext::Exact(c) => c.n_sites(),
            AnyContext::Mps(c) => c.n_sites(),
        }
    }
}

pub fn base_spec(config: &RunConfig) -> Result<PulseSpec<f64>> {
    let boundaries = config.control.boundaries()?;
    let spec = PulseSpec::new(
        config.control.guess_kind()?,
        boundaries,
        config.control.t_total,
        config.control.n_modes,
        config.optimizer.seed,
    );
    spec.validate()
        .map_err(|e| anyhow::anyhow!("control section: {e}"))?;
    Ok(spec)
}

fn optimizer_options(config: &RunConfig) -> OptimizeOptions<f64> {
    let mut opts = OptimizeOptions::new(config.optimizer.budget, config.optimizer.rho_halt);
    opts.restarts = config.optimizer.restarts;
    opts.optimize_frequencies = config.optimizer.optimize_frequencies;
    opts.simplex.init_scale = config.optimizer.simplex_scale;
    opts.stall_restart = if config.optimizer.stall_restart > 0 {
        Some(config.optimizer.stall_restart)
    } else {
        None
    };
    opts
}

fn pulse_samples(spec: &PulseSpec<f64>, grid: TimeGrid<f64>) -> Result<PulseSamples> {
    let pulse = spec
        .render(grid)
        .map_err(|e| anyhow::anyhow!("render: {e}"))?;
    let times: Vec<f64> = (0..=grid.n_steps).map(|i| grid.node_time(i)).collect();
    let depths = pulse
        .nodes
        .iter()
        .map(|&r| ratio_to_depth(r).unwrap_or(f64::NAN))
        .collect();
    Ok(PulseSamples {
        times,
        ratios: pulse.nodes.clone(),
        depths,
    })
}

fn grid_for(config: &RunConfig) -> Result<TimeGrid<f64>> {
    Ok(TimeGrid::with_step(config.control.t_total, config.backend.dt)?)
}

fn empty_record(config: &RunConfig, status: RunStatus, method: &str) -> RunRecord {
    RunRecord {
        version: env!("CARGO_PKG_VERSION").into(),
        config_hash: config.content_hash(),
        config_snapshot: config.clone(),
        status,
        seed: config.optimizer.seed,
        evaluation_trace: vec![],
        best_spec: None,
        best_pulse: None,
        best_defect_density: None,
        best_residual_energy: None,
        final_profile: None,
        truncation_summary: None,
        ground_energy_method: method.into(),
        evaluations: 0,
    }
}

/// Execute the experiment named by the config and persist its products.
pub fn run(config: &RunConfig) -> Result<RunReport> {
    run_with_pulse(config, None)
}

/// Like [`run`], with an externally supplied pulse (from a prior record) for
/// the experiments that re-apply one.
pub fn run_with_pulse(
    config: &RunConfig,
    pulse_from: Option<&PulseSpec<f64>>,
) -> Result<RunReport> {
    config.validate()?;
    let out_dir = Path::new(&config.output_dir);
    std::fs::create_dir_all(out_dir)?;
    match config.experiment {
        ExperimentKind::Optimize => optimize_run(config, out_dir),
        ExperimentKind::EvaluatePulse => evaluate_pulse(config, pulse_from, out_dir),
        ExperimentKind::RobustnessSweep => robustness_sweep(config, pulse_from, out_dir),
        ExperimentKind::BaselineGuesses => baseline_guesses(config, out_dir),
        ExperimentKind::ConvergenceStudy => convergence_study(config, pulse_from, out_dir),
    }
}

fn optimize_run(config: &RunConfig, out_dir: &Path) -> Result<RunReport> {
    let params = config.model.lattice_params()?;
    let grid = grid_for(config)?;
    let boundaries = config.control.boundaries()?;
    let ctx = AnyContext::prepare(config, &params, boundaries, grid)?;
    let spec = base_spec(config)?;
    let opts = optimizer_options(config);

    let outcome =
        optimize(&spec, &ctx, &opts).map_err(|e| anyhow::anyhow!("optimization failed: {e}"))?;
    let status: RunStatus = outcome.status.into();

    let best_pulse_sampled = outcome
        .best_spec
        .render(grid)
        .map_err(|e| anyhow::anyhow!("render: {e}"))?;
    let (profile, truncation) = ctx.final_run_details(&best_pulse_sampled)?;

    let mut record = empty_record(config, status, ctx.ground_energy_method());
    record.evaluation_trace = outcome.trace;
    record.best_spec = Some(outcome.best_spec.clone());
    record.best_pulse = Some(pulse_samples(&outcome.best_spec, grid)?);
    record.best_defect_density = Some(outcome.best_defect_density);
    record.best_residual_energy = Some(outcome.best_residual_energy);
    record.final_profile = Some(profile.clone());
    record.truncation_summary = truncation;
    record.evaluations = outcome.evaluations;

    let hash = record.config_hash.clone();
    record.save(out_dir)?;
    persist::write_with_hash(
        &out_dir.join("trace.tsv"),
        &hash,
        &persist::trace_table(&record.evaluation_trace),
    )?;
    persist::write_with_hash(
        &out_dir.join("pulse.dat"),
        &hash,
        &persist::pulse_table(record.best_pulse.as_ref().unwrap()),
    )?;
    let guess_samples = pulse_samples(&spec, grid)?;
    persist::write_with_hash(
        &out_dir.join("guess_pulse.dat"),
        &hash,
        &persist::pulse_table(&guess_samples),
    )?;
    persist::write_with_hash(
        &out_dir.join("profile.dat"),
        &hash,
        &persist::profile_table(&profile),
    )?;
    std::fs::write(out_dir.join("pulse.gp"), persist::pulse_plot_stub())?;
    Ok(RunReport { record, status })
}

fn evaluate_pulse(
    config: &RunConfig,
    pulse_from: Option<&PulseSpec<f64>>,
    out_dir: &Path,
) -> Result<RunReport> {
    let params = config.model.lattice_params()?;
    let grid = grid_for(config)?;
    let own_spec;
    let spec = match pulse_from {
        Some(s) => s,
        None => {
            own_spec = base_spec(config)?;
            &own_spec
        }
    };
    let ctx = AnyContext::prepare(config, &params, spec.boundary_values, grid)?;
    let pulse = spec
        .render(grid)
        .map_err(|e| anyhow::anyhow!("render: {e}"))?;
    let eval = ctx
        .evaluate_sampled(&pulse)
        .map_err(|e| anyhow::anyhow!("evaluation failed: {e}"))?;
    let (profile, truncation) = ctx.final_run_details(&pulse)?;

    let mut record = empty_record(config, RunStatus::Success, ctx.ground_energy_method());
    record.best_spec = Some(spec.clone());
    record.best_pulse = Some(pulse_samples(spec, grid)?);
    record.best_defect_density = Some(eval.defect_density);
    record.best_residual_energy = Some(eval.residual_energy_per_site);
    record.final_profile = Some(profile.clone());
    record.truncation_summary = truncation;
    record.evaluations = 1;

    let hash = record.config_hash.clone();
    record.save(out_dir)?;
    persist::write_with_hash(
        &out_dir.join("pulse.dat"),
        &hash,
        &persist::pulse_table(record.best_pulse.as_ref().unwrap()),
    )?;
    persist::write_with_hash(
        &out_dir.join("profile.dat"),
        &hash,
        &persist::profile_table(&profile),
    )?;
    std::fs::write(out_dir.join("pulse.gp"), persist::pulse_plot_stub())?;
    Ok(RunReport {
        record,
        status: RunStatus::Success,
    })
}

/// One row of the cross-size study.
#[derive(Debug, Clone, serde::Serialize)]
pub struct RobustnessRow {
    pub delta_n: i64,
    pub n_sites: usize,
    pub rho: Option<f64>,
    pub residual_energy: Option<f64>,
    pub extrapolation: bool,
    pub error: Option<String>,
}

fn robustness_sweep(
    config: &RunConfig,
    pulse_from: Option<&PulseSpec<f64>>,
    out_dir: &Path,
) -> Result<RunReport> {
    let Some(spec) = pulse_from else {
        bail!("robustness-sweep needs --pulse-from <run.json> (the optimized pulse to re-apply)");
    };
    let params0 = config.model.lattice_params()?;
    let grid = grid_for(config)?;
    let pulse = spec
        .render(grid)
        .map_err(|e| anyhow::anyhow!("render: {e}"))?;
    let n0 = params0.n_sites as i64;

    let rows: Vec<RobustnessRow> = config
        .robustness
        .delta_n
        .par_iter()
        .map(|&dn| {
            let n = (n0 + dn) as usize;
            // constant filling: the atom number rescales with N
            let mut params = params0.clone();
            params.n_sites = n;
            let extrapolation = (dn.unsigned_abs() as f64) > 0.2 * n0 as f64;
            let mut cfg = config.clone();
            if let Some(threshold) = config.robustness.mps_above_sites {
                if n > threshold {
                    cfg.backend.kind = BackendKind::Mps;
                }
            }
            let outcome = (|| -> Result<(f64, f64)> {
                let ctx = AnyContext::prepare(&cfg, &params, spec.boundary_values, grid)?;
                let eval = ctx
                    .evaluate_sampled(&pulse)
                    .map_err(|e| anyhow::anyhow!("{e}"))?;
                Ok((eval.defect_density, eval.residual_energy_per_site))
            })();
            match outcome {
                Ok((rho, de)) => RobustnessRow {
                    delta_n: dn,
                    n_sites: n,
                    rho: Some(rho),
                    residual_energy: Some(de),
                    extrapolation,
                    error: None,
                },
                Err(e) => RobustnessRow {
                    delta_n: dn,
                    n_sites: n,
                    rho: None,
                    residual_energy: None,
                    extrapolation,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();

    let mut record = empty_record(config, RunStatus::Success, "per-row");
    record.best_spec = Some(spec.clone());
    record.best_pulse = Some(pulse_samples(spec, grid)?);
    let hash = record.config_hash.clone();
    record.save(out_dir)?;

    let mut body = String::from(
        "# delta_n\tn_sites\trho\tresidual_energy_per_site\textrapolation\terror\n",
    );
    for r in &rows {
        body.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\n",
            r.delta_n,
            r.n_sites,
            r.rho.map_or("nan".into(), |v| format!("{v:.17e}")),
            r.residual_energy
                .map_or("nan".into(), |v| format!("{v:.17e}")),
            u8::from(r.extrapolation),
            r.error.as_deref().unwrap_or("-")
        ));
    }
    persist::write_with_hash(&out_dir.join("robustness.tsv"), &hash, &body)?;
    std::fs::write(
        out_dir.join("defects.gp"),
        persist::defects_plot_stub("robustness.tsv", "N"),
    )?;
    serde_json::to_writer_pretty(
        std::fs::File::create(out_dir.join("robustness.json"))?,
        &rows,
    )?;
    Ok(RunReport {
        record,
        status: RunStatus::Success,
    })
}

fn baseline_guesses(config: &RunConfig, out_dir: &Path) -> Result<RunReport> {
    let params = config.model.lattice_params()?;
    let grid = grid_for(config)?;
    let boundaries = config.control.boundaries()?;
    let t = config.control.t_total;
    let m = config.control.n_modes.max(1);
    let seed = config.optimizer.seed;

    // The three direct baselines.
    let mut specs: Vec<(String, PulseSpec<f64>)> = vec![
        (
            "exponential".into(),
            PulseSpec::new(GuessKind::Exponential, boundaries, t, 0, seed),
        ),
        (
            "linear".into(),
            PulseSpec::new(GuessKind::Linear, boundaries, t, 0, seed),
        ),
        ("random-correction".into(), {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut s = PulseSpec::new(GuessKind::Exponential, boundaries, t, m, seed);
            s.sin_coeffs = (0..m).map(|_| rng.gen_range(-0.3..0.3)).collect();
            s.cos_coeffs = (0..m).map(|_| rng.gen_range(-0.3..0.3)).collect();
            s
        }),
    ];

    // Transferred pulse: optimize on the smaller chain, re-apply here.
    let transfer_sites = params.n_sites.saturating_sub(2).max(2);
    if transfer_sites < params.n_sites {
        let mut small = config.clone();
        small.model.n_sites = transfer_sites;
        let small_params = small.model.lattice_params()?;
        let small_ctx = AnyContext::prepare(&small, &small_params, boundaries, grid)?;
        let small_spec = base_spec(&small)?;
        let opts = optimizer_options(&small);
        let small_out = optimize(&small_spec, &small_ctx, &opts)
            .map_err(|e| anyhow::anyhow!("transfer optimization failed: {e}"))?;
        specs.push((
            format!("transferred-n{transfer_sites}"),
            small_out.best_spec,
        ));
    }

    let ctx = AnyContext::prepare(config, &params, boundaries, grid)?;
    let evals: Vec<(String, Evaluation<f64>)> = specs
        .par_iter()
        .map(|(name, s)| {
            let e = ctx
                .evaluate(s)
                .map_err(|err| anyhow::anyhow!("baseline {name}: {err}"))?;
            Ok((name.clone(), e))
        })
        .collect::<Result<_>>()?;

    let mut record = empty_record(config, RunStatus::Success, ctx.ground_energy_method());
    record.evaluations = evals.len();
    let hash = record.config_hash.clone();
    record.save(out_dir)?;

    let rows: Vec<(String, Vec<f64>)> = evals
        .iter()
        .map(|(name, e)| {
            (
                name.clone(),
                vec![e.defect_density, e.residual_energy_per_site],
            )
        })
        .collect();
    persist::write_with_hash(
        &out_dir.join("baselines.tsv"),
        &hash,
        &persist::labeled_table(&["rho", "residual_energy_per_site"], &rows),
    )?;
    Ok(RunReport {
        record,
        status: RunStatus::Success,
    })
}

fn convergence_study(
    config: &RunConfig,
    pulse_from: Option<&PulseSpec<f64>>,
    out_dir: &Path,
) -> Result<RunReport> {
    if config.backend.kind != BackendKind::Mps {
        bail!("convergence-study needs the mps backend");
    }
    let own_spec;
    let spec = match pulse_from {
        Some(s) => s,
        None => {
            own_spec = base_spec(config)?;
            &own_spec
        }
    };

    // (label, config patch) cells: bond-dimension row, step row, cutoff row.
    enum Cell {
        M(usize),
        Dt(f64),
        NMax(usize),
    }
    let mut cells = Vec::new();
    for &m in &config.convergence.m_values {
        cells.push(Cell::M(m));
    }
    for &dt in &config.convergence.dt_values {
        cells.push(Cell::Dt(dt));
    }
    for &nm in &config.convergence.n_max_values {
        cells.push(Cell::NMax(nm));
    }

    let results: Vec<(String, Vec<f64>)> = cells
        .par_iter()
        .map(|cell| {
            let mut cfg = config.clone();
            let label = match cell {
                Cell::M(m) => {
                    cfg.backend.m_max = *m;
                    format!("m={m}")
                }
                Cell::Dt(dt) => {
                    cfg.backend.dt = *dt;
                    format!("dt={dt}")
                }
                Cell::NMax(nm) => {
                    cfg.model.n_max = *nm;
                    format!("n_max={nm}")
                }
            };
            let params = cfg.model.lattice_params()?;
            let grid = TimeGrid::with_step(cfg.control.t_total, cfg.backend.dt)?;
            let ctx = AnyContext::prepare(&cfg, &params, spec.boundary_values, grid)?;
            let pulse = spec
                .render(grid)
                .map_err(|e| anyhow::anyhow!("render: {e}"))?;
            let eval = ctx
                .evaluate_sampled(&pulse)
                .map_err(|e| anyhow::anyhow!("cell {label}: {e}"))?;
            Ok((
                label,
                vec![eval.defect_density, eval.residual_energy_per_site],
            ))
        })
        .collect::<Result<_>>()?;

    let mut record = empty_record(config, RunStatus::Success, "dmrg");
    record.best_spec = Some(spec.clone());
    record.evaluations = results.len();
    let hash = record.config_hash.clone();
    record.save(out_dir)?;
    persist::write_with_hash(
        &out_dir.join("convergence.tsv"),
        &hash,
        &persist::labeled_table(&["rho", "residual_energy_per_site"], &results),
    )?;
    Ok(RunReport {
        record,
        status: RunStatus::Success,
    })
}
