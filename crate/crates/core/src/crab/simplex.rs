//! Nelder-Mead direct search with the standard reflection/expansion/
//! contraction/shrink coefficients (1, 2, ½, ½).

use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct SimplexOptions<T> {
    /// Per-coordinate displacement used to build the initial polytope.
    pub init_scale: T,
    /// Terminate when the spread max−min of cached vertex values drops here.
    pub value_tol: T,
    /// Safety cap on iterations (evaluation budgets are enforced by the
    /// caller through [`SimplexSignal::Stop`]).
    pub max_iterations: usize,
}

impl<T: Scalar> Default for SimplexOptions<T> {
    fn default() -> Self {
        Self {
            init_scale: T::from_f64_lit(0.25),
            value_tol: T::from_f64_lit(1e-10),
            max_iterations: 100_000,
        }
    }
}

/// What an evaluation tells the driver.
pub enum SimplexSignal<T> {
    Value(T),
    /// Stop immediately (threshold reached, budget exhausted, …); the value
    /// is still used for best-point tracking when finite.
    Stop(T),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    SpreadConverged,
    Signalled,
    IterationCap,
}

#[derive(Debug, Clone)]
pub struct SimplexRun<T> {
    pub best_point: Vec<T>,
    pub best_value: T,
    pub iterations: usize,
    pub reason: StopReason,
    pub final_spread: T,
}

/// Minimize `eval` starting from `x0`. The initial polytope is `x0` plus a
/// displacement of `init_scale` along each coordinate.
pub fn nelder_mead<T: Scalar>(
    x0: &[T],
    opts: &SimplexOptions<T>,
    mut eval: impl FnMut(&[T]) -> SimplexSignal<T>,
) -> SimplexRun<T> {
    let dim = x0.len();
    assert!(dim >= 1, "need at least one optimization variable");
    let alpha = T::one();
    let gamma = T::from_f64_lit(2.0);
    let rho = T::from_f64_lit(0.5);
    let sigma = T::from_f64_lit(0.5);

    let mut best_point = x0.to_vec();
    let mut best_value = T::infinity();

    macro_rules! probe {
        ($x:expr, $run_state:expr) => {{
            match eval($x) {
                SimplexSignal::Value(v) => {
                    if v < best_value {
                        best_value = v;
                        best_point = $x.to_vec();
                    }
                    v
                }
                SimplexSignal::Stop(v) => {
                    if v < best_value {
                        best_value = v;
                        best_point = $x.to_vec();
                    }
                    return SimplexRun {
                        best_point,
                        best_value,
                        iterations: $run_state,
                        reason: StopReason::Signalled,
                        final_spread: T::infinity(),
                    };
                }
            }
        }};
    }

    let mut simplex: Vec<Vec<T>> = Vec::with_capacity(dim + 1);
    let mut values: Vec<T> = Vec::with_capacity(dim + 1);
    simplex.push(x0.to_vec());
    values.push(probe!(x0, 0));
    for i in 0..dim {
        let mut v = x0.to_vec();
        v[i] = v[i] + opts.init_scale;
        let f = probe!(&v, 0);
        simplex.push(v);
        values.push(f);
    }

    for iter in 0..opts.max_iterations {
        let mut order: Vec<usize> = (0..=dim).collect();
        order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
        let simplex_sorted: Vec<Vec<T>> = order.iter().map(|&i| simplex[i].clone()).collect();
        let values_sorted: Vec<T> = order.iter().map(|&i| values[i]).collect();
        simplex = simplex_sorted;
        values = values_sorted;

        let spread = values[dim] - values[0];
        if spread <= opts.value_tol {
            return SimplexRun {
                best_point,
                best_value,
                iterations: iter,
                reason: StopReason::SpreadConverged,
                final_spread: spread,
            };
        }

        // Centroid of all but the worst vertex.
        let mut centroid = vec![T::zero(); dim];
        for v in simplex.iter().take(dim) {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c = *c + *x;
            }
        }
        let inv = T::one() / T::from_f64_lit(dim as f64);
        for c in centroid.iter_mut() {
            *c = *c * inv;
        }

        let worst = simplex[dim].clone();
        let reflected: Vec<T> = centroid
            .iter()
            .zip(&worst)
            .map(|(&c, &w)| c + alpha * (c - w))
            .collect();
        let f_r = probe!(&reflected, iter);

        if f_r < values[0] {
            let expanded: Vec<T> = centroid
                .iter()
                .zip(&reflected)
                .map(|(&c, &r)| c + gamma * (r - c))
                .collect();
            let f_e = probe!(&expanded, iter);
            if f_e < f_r {
                simplex[dim] = expanded;
                values[dim] = f_e;
            } else {
                simplex[dim] = reflected;
                values[dim] = f_r;
            }
        } else if f_r < values[dim - 1] {
            simplex[dim] = reflected;
            values[dim] = f_r;
        } else {
            let (contracted, f_c) = if f_r < values[dim] {
                let x: Vec<T> = centroid
                    .iter()
                    .zip(&reflected)
                    .map(|(&c, &r)| c + rho * (r - c))
                    .collect();
                let f = probe!(&x, iter);
                (x, f)
            } else {
                let x: Vec<T> = centroid
                    .iter()
                    .zip(&worst)
                    .map(|(&c, &w)| c - rho * (c - w))
                    .collect();
                let f = probe!(&x, iter);
                (x, f)
            };
            if f_c < values[dim].min(f_r) {
                simplex[dim] = contracted;
                values[dim] = f_c;
            } else {
                // Shrink toward the best vertex.
                let best_vertex = simplex[0].clone();
                for i in 1..=dim {
                    for j in 0..dim {
                        simplex[i][j] = best_vertex[j] + sigma * (simplex[i][j] - best_vertex[j]);
                    }
                    let snapshot = simplex[i].clone();
                    values[i] = probe!(&snapshot, iter);
                }
            }
        }
    }

    SimplexRun {
        best_point,
        best_value,
        iterations: opts.max_iterations,
        reason: StopReason::IterationCap,
        final_spread: values[dim] - values[0],
    }
}
