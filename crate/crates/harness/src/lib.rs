//! Experiment harness for the CRAB Bose-Hubbard control library:
//! config-driven runs, persistence, and the reproduction studies.

pub mod config;
pub mod experiments;
pub mod persist;
pub mod record;

/// Resolve the worker-thread count: explicit config wins, then the
/// BHCRAB_WORKERS environment variable, then all cores.
pub fn worker_threads(config_workers: usize) -> usize {
    if config_workers > 0 {
        return config_workers;
    }
    std::env::var("BHCRAB_WORKERS")
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&n| n > 0)
        .unwrap_or(0)
}
