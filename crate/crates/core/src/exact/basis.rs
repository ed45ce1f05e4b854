//! Number-conserving Fock basis with a bounded local occupation.

use thiserror::Error;

use crate::lattice::LatticeParams;

#[derive(Debug, Error, PartialEq)]
pub enum BasisError {
    #[error("basis of {states} states exceeds the configured limit of {limit}")]
    Capacity { states: u64, limit: u64 },
    #[error("invalid basis request: {0}")]
    Invalid(String),
}

/// Default cap on enumerated basis sizes (states, not bytes). N = 12 at unit
/// filling with n_max = 4 is ~9.8·10⁵ states and stays well inside.
pub const DEFAULT_STATE_LIMIT: u64 = 4_000_000;

/// Ordered basis of occupation tuples with fixed total atom number and a
/// per-site cutoff. States are stored flat in ascending lexicographic order;
/// ranking and unranking are combinatorial, so no hash map is kept.
#[derive(Debug, Clone)]
pub struct FockBasis {
    pub n_sites: usize,
    pub n_atoms: usize,
    pub n_max: usize,
    /// Row-major occupations, `n_sites` entries per state.
    states: Vec<u8>,
    /// counts[k][a]: bounded compositions of `a` atoms into `k` sites.
    counts: Vec<Vec<u64>>,
}

impl FockBasis {
    /// Enumerate the basis for the given parameters under the default size
    /// limit.
    pub fn build(params: &LatticeParams) -> Result<Self, BasisError> {
        Self::build_with_limit(params, DEFAULT_STATE_LIMIT)
    }

    pub fn build_with_limit(params: &LatticeParams, limit: u64) -> Result<Self, BasisError> {
        params
            .validate()
            .map_err(|e| BasisError::Invalid(e.to_string()))?;
        Self::new(params.n_sites, params.n_atoms(), params.n_max, limit)
    }

    pub fn new(
        n_sites: usize,
        n_atoms: usize,
        n_max: usize,
        limit: u64,
    ) -> Result<Self, BasisError> {
        if n_max > u8::MAX as usize {
            return Err(BasisError::Invalid("n_max exceeds u8 range".into()));
        }
        let counts = composition_counts(n_sites, n_atoms, n_max);
        let size = counts[n_sites][n_atoms];
        if size == 0 {
            return Err(BasisError::Invalid(format!(
                "no states: {n_atoms} atoms cannot fit on {n_sites} sites with cutoff {n_max}"
            )));
        }
        if size > limit {
            return Err(BasisError::Capacity {
                states: size,
                limit,
            });
        }
        let mut states = Vec::with_capacity(size as usize * n_sites);
        let mut current = vec![0u8; n_sites];
        enumerate(&mut states, &mut current, 0, n_atoms, n_sites, n_max);
        debug_assert_eq!(states.len(), size as usize * n_sites);
        Ok(Self {
            n_sites,
            n_atoms,
            n_max,
            states,
            counts,
        })
    }

    pub fn len(&self) -> usize {
        self.states.len() / self.n_sites
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Occupation tuple of the state with ordinal `index`.
    pub fn state(&self, index: usize) -> &[u8] {
        &self.states[index * self.n_sites..(index + 1) * self.n_sites]
    }

    /// Ordinal of an occupation tuple; the exact inverse of [`Self::state`].
    /// The tuple must be in-sector (sums to `n_atoms`, entries ≤ `n_max`).
    pub fn rank(&self, occ: &[u8]) -> usize {
        debug_assert_eq!(occ.len(), self.n_sites);
        debug_assert_eq!(occ.iter().map(|&x| x as usize).sum::<usize>(), self.n_atoms);
        let mut rank = 0u64;
        let mut remaining = self.n_atoms;
        for (i, &s) in occ.iter().enumerate() {
            let tail = self.n_sites - i - 1;
            for v in 0..s as usize {
                if remaining >= v {
                    rank += self.counts[tail][remaining - v];
                }
            }
            remaining -= s as usize;
        }
        rank as usize
    }
}

fn composition_counts(n_sites: usize, n_atoms: usize, n_max: usize) -> Vec<Vec<u64>> {
    let mut counts = vec![vec![0u64; n_atoms + 1]; n_sites + 1];
    counts[0][0] = 1;
    for k in 1..=n_sites {
        for a in 0..=n_atoms {
            let mut total = 0u64;
            for v in 0..=n_max.min(a) {
                total += counts[k - 1][a - v];
            }
            counts[k][a] = total;
        }
    }
    counts
}

fn enumerate(
    out: &mut Vec<u8>,
    current: &mut [u8],
    site: usize,
    remaining: usize,
    n_sites: usize,
    n_max: usize,
) {
    if site == n_sites {
        if remaining == 0 {
            out.extend_from_slice(current);
        }
        return;
    }
    let tail_capacity = (n_sites - site - 1) * n_max;
    for v in 0..=n_max.min(remaining) {
        if remaining - v > tail_capacity {
            continue;
        }
        current[site] = v as u8;
        enumerate(out, current, site + 1, remaining - v, n_sites, n_max);
    }
    current[site] = 0;
}
