//! Uniform time grids and sampled control trajectories.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("time step must be positive (t_total {t_total}, n_steps {n_steps})")]
    NonPositiveStep { t_total: f64, n_steps: usize },
    #[error("sample count {got} does not match the grid ({want})")]
    SampleMismatch { got: usize, want: usize },
}

/// Uniform grid over [0, T] with `n_steps` propagation steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid<T> {
    pub t_total: T,
    pub n_steps: usize,
}

impl<T: Scalar> TimeGrid<T> {
    pub fn new(t_total: T, n_steps: usize) -> Result<Self, GridError> {
        if n_steps == 0 || t_total <= T::zero() {
            return Err(GridError::NonPositiveStep {
                t_total: t_total.to_f64().unwrap_or(f64::NAN),
                n_steps,
            });
        }
        Ok(Self { t_total, n_steps })
    }

    /// Zero-step grid: evolution over it is the identity.
    pub fn empty() -> Self {
        Self {
            t_total: T::zero(),
            n_steps: 0,
        }
    }

    /// Grid with the requested step size; the step count is rounded to cover
    /// [0, T] exactly.
    pub fn with_step(t_total: T, dt: T) -> Result<Self, GridError> {
        if dt <= T::zero() || t_total <= T::zero() {
            return Err(GridError::NonPositiveStep {
                t_total: t_total.to_f64().unwrap_or(f64::NAN),
                n_steps: 0,
            });
        }
        let n = (t_total / dt).round().to_f64().unwrap_or(0.0).max(1.0) as usize;
        Self::new(t_total, n)
    }

    pub fn dt(&self) -> T {
        debug_assert!(self.n_steps > 0, "empty grid has no step size");
        self.t_total / T::from_f64_lit(self.n_steps as f64)
    }

    /// i-th node time, exact at both endpoints.
    pub fn node_time(&self, i: usize) -> T {
        debug_assert!(i <= self.n_steps);
        if i == self.n_steps {
            self.t_total
        } else {
            self.t_total * T::from_f64_lit(i as f64) / T::from_f64_lit(self.n_steps as f64)
        }
    }

    /// Temporal midpoint of step i.
    pub fn mid_time(&self, i: usize) -> T {
        debug_assert!(i < self.n_steps);
        self.t_total * T::from_f64_lit(i as f64 + 0.5) / T::from_f64_lit(self.n_steps as f64)
    }
}

/// Control trajectory J/U(t) sampled on a uniform grid: values at the nodes
/// (for boundary checks, plotting, and merged gates) and at step midpoints
/// (for per-step propagation).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledPulse<T> {
    pub grid: TimeGrid<T>,
    /// n_steps + 1 node values.
    pub nodes: Vec<T>,
    /// n_steps midpoint values.
    pub midpoints: Vec<T>,
    /// True if the positivity floor clipped any sample.
    pub clamped: bool,
}

impl<T: Scalar> SampledPulse<T> {
    pub fn from_fn(grid: TimeGrid<T>, mut f: impl FnMut(T) -> T) -> Self {
        let nodes = (0..=grid.n_steps).map(|i| f(grid.node_time(i))).collect();
        let midpoints = (0..grid.n_steps).map(|i| f(grid.mid_time(i))).collect();
        Self {
            grid,
            nodes,
            midpoints,
            clamped: false,
        }
    }

    /// Constant control at `value`.
    pub fn constant(grid: TimeGrid<T>, value: T) -> Self {
        Self::from_fn(grid, |_| value)
    }

    /// Zero-step trajectory pinned at `value` (identity evolution).
    pub fn empty(value: T) -> Self {
        Self {
            grid: TimeGrid::empty(),
            nodes: vec![value],
            midpoints: vec![],
            clamped: false,
        }
    }

    pub fn validate(&self) -> Result<(), GridError> {
        if self.nodes.len() != self.grid.n_steps + 1 {
            return Err(GridError::SampleMismatch {
                got: self.nodes.len(),
                want: self.grid.n_steps + 1,
            });
        }
        if self.midpoints.len() != self.grid.n_steps {
            return Err(GridError::SampleMismatch {
                got: self.midpoints.len(),
                want: self.grid.n_steps,
            });
        }
        Ok(())
    }

    pub fn start(&self) -> T {
        self.nodes[0]
    }

    pub fn end(&self) -> T {
        *self.nodes.last().unwrap()
    }

    /// Trajectory traversed backwards in time (for reversibility checks).
    pub fn reversed(&self) -> Self {
        let mut nodes = self.nodes.clone();
        nodes.reverse();
        let mut midpoints = self.midpoints.clone();
        midpoints.reverse();
        Self {
            grid: self.grid,
            nodes,
            midpoints,
            clamped: self.clamped,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_endpoints_are_exact() {
        let g = TimeGrid::new(50.0f64, 7).unwrap();
        assert_eq!(g.node_time(0), 0.0);
        assert_eq!(g.node_time(7), 50.0);
    }

    #[test]
    fn zero_steps_rejected() {
        assert!(TimeGrid::new(1.0f64, 0).is_err());
        assert!(TimeGrid::new(-1.0f64, 5).is_err());
        assert!(TimeGrid::with_step(1.0f64, 0.0).is_err());
    }

    #[test]
    fn with_step_rounds_to_cover() {
        let g = TimeGrid::with_step(50.0f64, 1e-2).unwrap();
        assert_eq!(g.n_steps, 5000);
        assert!((g.dt() - 1e-2).abs() < 1e-15);
    }

    #[test]
    fn empty_grid_round_trips() {
        let p = SampledPulse::empty(0.3f64);
        p.validate().unwrap();
        assert_eq!(p.start(), 0.3);
        assert_eq!(p.end(), 0.3);
    }

    #[test]
    fn sampled_lengths_and_reversal() {
        let g = TimeGrid::new(1.0f64, 4).unwrap();
        let p = SampledPulse::from_fn(g, |t| 1.0 + t);
        p.validate().unwrap();
        assert_eq!(p.nodes.len(), 5);
        assert_eq!(p.midpoints.len(), 4);
        let r = p.reversed();
        assert_eq!(r.start(), p.end());
        assert_eq!(r.midpoints[0], p.midpoints[3]);
    }
}
