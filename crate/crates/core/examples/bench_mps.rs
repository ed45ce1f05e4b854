use std::time::Instant;

use bhcrab::backend::{Backend, MpsBackend};
use bhcrab::lattice::LatticeParams;
use bhcrab::pulse::{SampledPulse, TimeGrid};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let n: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(8);
    let m: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(64);
    let t_total: f64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(5.0);
    let dt: f64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(1e-3);

    let params = LatticeParams::homogeneous(n);
    let backend = MpsBackend::<f64>::new(&params, m);
    let t0 = Instant::now();
    let (e, gs) = backend.ground_state(0.52).unwrap();
    println!("DMRG N={n} m={m}: {:?}  E={e:.8}  chi={:?}", t0.elapsed(), gs.bond_dims());
    let grid = TimeGrid::with_step(t_total, dt).unwrap();
    let pulse = SampledPulse::from_fn(grid, |t| 0.52f64 * (0.0024f64/0.52).powf(t / 50.0));
    let t0 = Instant::now();
    let fin = backend.evolve(&gs, &pulse, None).unwrap();
    let el = t0.elapsed();
    println!(
        "TEBD N={n} m={m} T={t_total} dt={dt} ({} steps): {:?}  ({:.2} ms/step)  chi_final={:?} disc={:.2e}",
        grid.n_steps, el, el.as_secs_f64() * 1000.0 / grid.n_steps as f64, fin.bond_dims(), fin.truncation_log.cumulative
    );
}
