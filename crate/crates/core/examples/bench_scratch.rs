use std::time::Instant;

use bhcrab::backend::ExactBackend;
use bhcrab::crab::{
    optimize, DefectReference, EvaluationContext, GuessKind, OptimizeOptions, PulseSpec,
};
use bhcrab::lattice::LatticeParams;
use bhcrab::pulse::TimeGrid;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let n: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(6);
    let t_total: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(10.0);
    let m_modes: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(4);
    let budget: usize = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(400);
    let rho_halt: f64 = args.get(5).and_then(|s| s.parse().ok()).unwrap_or(1e-2);
    let scale: f64 = args.get(6).and_then(|s| s.parse().ok()).unwrap_or(0.25);

    let params = LatticeParams::homogeneous(n);
    let backend = ExactBackend::<f64>::new(&params).unwrap();
    let grid = TimeGrid::with_step(t_total, 1e-2).unwrap();
    let boundaries = (0.52, 2.4e-3);
    let ctx = EvaluationContext::prepare(&backend, boundaries, grid, DefectReference::NominalFilling).unwrap();

    let spec = PulseSpec::new(GuessKind::Exponential, boundaries, t_total, m_modes, 42);
    let mut opts = OptimizeOptions::new(budget, rho_halt);
    opts.simplex.init_scale = scale;
    opts.restarts = 4;

    let t0 = Instant::now();
    let out = optimize(&spec, &ctx, &opts).unwrap();
    println!(
        "N={n} T={t_total} M={m_modes} budget={budget} scale={scale}: status {:?} evals {} restarts {} best rho {:.4e} dE/N {:.4e}  [{:?}]",
        out.status, out.evaluations, out.restarts_used, out.best_defect_density, out.best_residual_energy, t0.elapsed()
    );
    // best-so-far curve, decile snapshots
    let mut best = f64::INFINITY;
    let mut marks = Vec::new();
    for (i, e) in out.trace.iter().enumerate() {
        best = best.min(e.defect_density);
        if i % (out.trace.len() / 10).max(1) == 0 || i + 1 == out.trace.len() {
            marks.push(format!("{}:{:.2e}", i, best));
        }
    }
    println!("  best-so-far rho: {}", marks.join("  "));
}
