//! Pulse parameterization: guess ramps corrected by a truncated Fourier
//! series with randomized harmonics.
//!
//! A candidate control is c(t) = c⁰(t)·f(t) where c⁰ is the guess ramp and
//! f(t) = 1 + Σ_k [A_k sin(ν_k t) + B_k cos(ν_k t)] with ν_k = 2πk(1+r_k)/T,
//! de-trended by the affine correction that pins f(0) = f(T) = 1 so every
//! candidate keeps the guess's endpoint values exactly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::CrabError;
use crate::pulse::{SampledPulse, TimeGrid};
use crate::scalar::Scalar;

/// Shape of the uncorrected guess ramp.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GuessKind<T> {
    /// Log-linear (geometric) interpolation between the boundaries.
    Exponential,
    /// Affine interpolation.
    Linear,
    /// Monotone cubic spline through (time, value) points spanning [0, T].
    CustomTable { points: Vec<(T, T)> },
}

/// The optimization variable: guess ramp plus CRAB correction coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseSpec<T> {
    pub guess: GuessKind<T>,
    /// Total evolution time T in ħ/U.
    pub t_total: T,
    /// Number of correction modes M.
    pub n_modes: usize,
    /// A_k, length M.
    pub sin_coeffs: Vec<T>,
    /// B_k, length M.
    pub cos_coeffs: Vec<T>,
    /// r_k ∈ [0, 1], length M; ν_k = 2πk(1+r_k)/T.
    pub freq_jitter: Vec<T>,
    /// (c(0), c(T)) in J/U.
    pub boundary_values: (T, T),
    pub rng_seed: u64,
}

impl<T: Scalar> PulseSpec<T> {
    /// Zero-correction spec over the given guess, with jitter drawn from the
    /// seed (flat on [0, 1]).
    pub fn new(
        guess: GuessKind<T>,
        boundary_values: (T, T),
        t_total: T,
        n_modes: usize,
        rng_seed: u64,
    ) -> Self {
        let freq_jitter = draw_jitter(n_modes, rng_seed);
        Self {
            guess,
            t_total,
            n_modes,
            sin_coeffs: vec![T::zero(); n_modes],
            cos_coeffs: vec![T::zero(); n_modes],
            freq_jitter,
            boundary_values,
            rng_seed,
        }
    }

    /// The randomized harmonics, exactly ν_k = 2πk(1 + r_k)/T.
    pub fn frequencies(&self) -> Vec<T> {
        let two_pi = T::PI() + T::PI();
        (0..self.n_modes)
            .map(|k| {
                two_pi * T::from_f64_lit((k + 1) as f64) * (T::one() + self.freq_jitter[k])
                    / self.t_total
            })
            .collect()
    }

    pub fn validate(&self) -> Result<(), CrabError> {
        if self.t_total <= T::zero() {
            return Err(CrabError::Domain("t_total must be positive".into()));
        }
        if self.n_modes == 0
            && (!self.sin_coeffs.is_empty() || !self.cos_coeffs.is_empty())
        {
            return Err(CrabError::Shape(
                "zero modes with nonempty coefficient vectors".into(),
            ));
        }
        if self.sin_coeffs.len() != self.n_modes
            || self.cos_coeffs.len() != self.n_modes
            || self.freq_jitter.len() != self.n_modes
        {
            return Err(CrabError::Shape(format!(
                "coefficient vectors must have length n_modes = {}",
                self.n_modes
            )));
        }
        if self.boundary_values.0 <= T::zero() || self.boundary_values.1 <= T::zero() {
            return Err(CrabError::Domain(
                "boundary control values must be positive".into(),
            ));
        }
        if let GuessKind::CustomTable { points } = &self.guess {
            if points.len() < 2 {
                return Err(CrabError::Shape(
                    "custom table needs at least two points".into(),
                ));
            }
            for w in points.windows(2) {
                if w[1].0 <= w[0].0 {
                    return Err(CrabError::Shape(
                        "custom table times must be strictly increasing".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Value of the uncorrected guess ramp at time t.
    pub fn guess_value(&self, t: T) -> T {
        let (b0, b1) = self.boundary_values;
        let s = (t / self.t_total).max(T::zero()).min(T::one());
        match &self.guess {
            GuessKind::Exponential => b0 * (b1 / b0).powf(s),
            GuessKind::Linear => b0 + (b1 - b0) * s,
            GuessKind::CustomTable { points } => monotone_spline(points, t),
        }
    }

    /// Render the corrected control on a grid. Boundary values are pinned
    /// exactly; non-positive samples are clamped to the positivity floor
    /// (10⁻⁴ of the smaller boundary) and flagged.
    pub fn render(&self, grid: TimeGrid<T>) -> Result<SampledPulse<T>, CrabError> {
        self.validate()?;
        let freqs = self.frequencies();
        let g = |t: T| {
            let mut acc = T::one();
            for k in 0..self.n_modes {
                let phase = freqs[k] * t;
                acc = acc + self.sin_coeffs[k] * phase.sin() + self.cos_coeffs[k] * phase.cos();
            }
            acc
        };
        let g0 = g(T::zero());
        let g_t = g(self.t_total);
        let floor = self.boundary_values.0.min(self.boundary_values.1) * T::from_f64_lit(1e-4);
        let mut clamped = false;
        let mut value_at = |t: T| {
            let s = t / self.t_total;
            let f = g(t) - (T::one() - s) * (g0 - T::one()) - s * (g_t - T::one());
            let c = self.guess_value(t) * f;
            if c <= T::zero() {
                clamped = true;
                floor
            } else {
                c
            }
        };
        let nodes: Vec<T> = (0..=grid.n_steps).map(|i| value_at(grid.node_time(i))).collect();
        let midpoints: Vec<T> = (0..grid.n_steps).map(|i| value_at(grid.mid_time(i))).collect();
        Ok(SampledPulse {
            grid,
            nodes,
            midpoints,
            clamped,
        })
    }

    /// Copy with fresh jitter drawn from a derived seed (used on restarts).
    pub fn with_jitter_from_seed(&self, seed: u64) -> Self {
        let mut out = self.clone();
        out.rng_seed = seed;
        out.freq_jitter = draw_jitter(self.n_modes, seed);
        out
    }
}

fn draw_jitter<T: Scalar>(n_modes: usize, seed: u64) -> Vec<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_modes)
        .map(|_| T::from_f64_lit(rng.gen::<f64>()))
        .collect()
}

/// Sampled guess ramp without correction.
pub fn guess_pulse<T: Scalar>(
    kind: GuessKind<T>,
    boundary_values: (T, T),
    t_total: T,
    grid: TimeGrid<T>,
) -> Result<SampledPulse<T>, CrabError> {
    let spec = PulseSpec {
        guess: kind,
        t_total,
        n_modes: 0,
        sin_coeffs: vec![],
        cos_coeffs: vec![],
        freq_jitter: vec![],
        boundary_values,
        rng_seed: 0,
    };
    spec.render(grid)
}

/// Monotonicity-preserving cubic interpolation (Fritsch-Carlson slopes)
/// through strictly increasing abscissae; clamps outside the table.
fn monotone_spline<T: Scalar>(points: &[(T, T)], t: T) -> T {
    let n = points.len();
    if t <= points[0].0 {
        return points[0].1;
    }
    if t >= points[n - 1].0 {
        return points[n - 1].1;
    }
    // interval secants
    let mut deltas = Vec::with_capacity(n - 1);
    for w in points.windows(2) {
        deltas.push((w[1].1 - w[0].1) / (w[1].0 - w[0].0));
    }
    // tangents
    let mut m = vec![T::zero(); n];
    m[0] = deltas[0];
    m[n - 1] = deltas[n - 2];
    for i in 1..n - 1 {
        if deltas[i - 1] * deltas[i] <= T::zero() {
            m[i] = T::zero();
        } else {
            m[i] = (deltas[i - 1] + deltas[i]) / T::from_f64_lit(2.0);
        }
    }
    for i in 0..n - 1 {
        if deltas[i] == T::zero() {
            m[i] = T::zero();
            m[i + 1] = T::zero();
        } else {
            let a = m[i] / deltas[i];
            let b = m[i + 1] / deltas[i];
            let s = a * a + b * b;
            if s > T::from_f64_lit(9.0) {
                let tau = T::from_f64_lit(3.0) / s.sqrt();
                m[i] = tau * a * deltas[i];
                m[i + 1] = tau * b * deltas[i];
            }
        }
    }
    // locate the interval
    let mut lo = 0usize;
    for i in 0..n - 1 {
        if t < points[i + 1].0 {
            lo = i;
            break;
        }
    }
    let (x0, y0) = points[lo];
    let (x1, y1) = points[lo + 1];
    let h = x1 - x0;
    let s = (t - x0) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    let two = T::from_f64_lit(2.0);
    let three = T::from_f64_lit(3.0);
    let h00 = two * s3 - three * s2 + T::one();
    let h10 = s3 - two * s2 + s;
    let h01 = -two * s3 + three * s2;
    let h11 = s3 - s2;
    h00 * y0 + h10 * h * m[lo] + h01 * y1 + h11 * h * m[lo + 1]
}
