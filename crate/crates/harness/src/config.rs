//! Declarative run configuration: TOML on disk, fully serializable, with a
//! content hash that stamps every output artifact.
//!
//! Units: times in ħ/U, energies in U (the on-site interaction, fixed to 1),
//! trap curvature in U per site², control boundaries either as lattice depth
//! V/Eᵣ or directly as the hopping ratio J/U.

use anyhow::{bail, Context, Result};
use bhcrab::crab::GuessKind;
use bhcrab::lattice::{self, LatticeParams};
use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Optimize,
    EvaluatePulse,
    RobustnessSweep,
    BaselineGuesses,
    ConvergenceStudy,
}

impl std::fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ExperimentKind::Optimize => "optimize",
            ExperimentKind::EvaluatePulse => "evaluate-pulse",
            ExperimentKind::RobustnessSweep => "robustness-sweep",
            ExperimentKind::BaselineGuesses => "baseline-guesses",
            ExperimentKind::ConvergenceStudy => "convergence-study",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendKind {
    Exact,
    Mps,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Lattice sites N.
    pub n_sites: usize,
    /// Trap curvature Ω in U per site²; 0 = homogeneous.
    #[serde(default)]
    pub trap_curvature: f64,
    /// Local occupation cutoff.
    #[serde(default = "default_n_max")]
    pub n_max: usize,
    /// Mean atoms per site as [numerator, denominator].
    #[serde(default = "default_filling")]
    pub filling: (i64, i64),
}

fn default_n_max() -> usize {
    4
}

fn default_filling() -> (i64, i64) {
    (1, 1)
}

impl ModelConfig {
    pub fn lattice_params(&self) -> Result<LatticeParams> {
        let params = LatticeParams {
            n_sites: self.n_sites,
            trap_curvature: self.trap_curvature,
            interaction: 1.0,
            n_max: self.n_max,
            filling: Ratio::new(self.filling.0, self.filling.1),
        };
        params.validate().context("invalid [model] section")?;
        Ok(params)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GuessShape {
    Exponential,
    Linear,
    CustomTable,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlConfig {
    /// Guess ramp family.
    #[serde(default = "default_guess")]
    pub guess: GuessShape,
    /// Total evolution time T in ħ/U.
    pub t_total: f64,
    /// Number of correction modes M.
    #[serde(default = "default_n_modes")]
    pub n_modes: usize,
    /// Ramp start as lattice depth V/Eᵣ (exclusive with start_ratio).
    #[serde(default)]
    pub start_depth: Option<f64>,
    /// Ramp end as lattice depth V/Eᵣ.
    #[serde(default)]
    pub end_depth: Option<f64>,
    /// Ramp start as hopping ratio J/U.
    #[serde(default)]
    pub start_ratio: Option<f64>,
    /// Ramp end as hopping ratio J/U.
    #[serde(default)]
    pub end_ratio: Option<f64>,
    /// Table of (time, J/U) points for the custom-table guess.
    #[serde(default)]
    pub table: Vec<(f64, f64)>,
}

fn default_guess() -> GuessShape {
    GuessShape::Exponential
}

fn default_n_modes() -> usize {
    4
}

impl ControlConfig {
    /// Resolved (c(0), c(T)) in J/U. Depth inputs go through the calibrated
    /// map; the paper's anchors (V = 2 → 0.52, V = 22 → 0.0024) are the
    /// defaults when nothing is given.
    pub fn boundaries(&self) -> Result<(f64, f64)> {
        let start = match (self.start_ratio, self.start_depth) {
            (Some(r), None) => r,
            (None, Some(d)) => lattice::depth_to_ratio(d)?,
            (None, None) => lattice::depth_to_ratio(2.0)?,
            (Some(_), Some(_)) => bail!("give either start_ratio or start_depth, not both"),
        };
        let end = match (self.end_ratio, self.end_depth) {
            (Some(r), None) => r,
            (None, Some(d)) => lattice::depth_to_ratio(d)?,
            (None, None) => lattice::depth_to_ratio(22.0)?,
            (Some(_), Some(_)) => bail!("give either end_ratio or end_depth, not both"),
        };
        Ok((start, end))
    }

    pub fn guess_kind(&self) -> Result<GuessKind<f64>> {
        Ok(match self.guess {
            GuessShape::Exponential => GuessKind::Exponential,
            GuessShape::Linear => GuessKind::Linear,
            GuessShape::CustomTable => {
                if self.table.len() < 2 {
                    bail!("custom-table guess needs at least two [control].table points");
                }
                GuessKind::CustomTable {
                    points: self.table.clone(),
                }
            }
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    /// Propagation step in ħ/U.
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Bond-dimension cap (MPS backend).
    #[serde(default = "default_m_max")]
    pub m_max: usize,
    /// Per-gate discarded-weight cutoff (MPS backend).
    #[serde(default = "default_svd_cutoff")]
    pub svd_cutoff: f64,
    /// Basis-size cap for the exact backend.
    #[serde(default = "default_state_limit")]
    pub max_basis_states: u64,
}

fn default_dt() -> f64 {
    1e-2
}

fn default_m_max() -> usize {
    64
}

fn default_svd_cutoff() -> f64 {
    1e-10
}

fn default_state_limit() -> u64 {
    bhcrab::exact::DEFAULT_STATE_LIMIT
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default = "default_rho_halt")]
    pub rho_halt: f64,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_simplex_scale")]
    pub simplex_scale: f64,
    /// Evaluations without material improvement before a fresh-jitter
    /// restart (0 disables).
    #[serde(default = "default_stall_restart")]
    pub stall_restart: usize,
    #[serde(default)]
    pub optimize_frequencies: bool,
}

fn default_budget() -> usize {
    2000
}

fn default_rho_halt() -> f64 {
    1e-3
}

fn default_restarts() -> usize {
    4
}

fn default_seed() -> u64 {
    42
}

fn default_simplex_scale() -> f64 {
    0.15
}

fn default_stall_restart() -> usize {
    200
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            budget: default_budget(),
            rho_halt: default_rho_halt(),
            restarts: default_restarts(),
            seed: default_seed(),
            simplex_scale: default_simplex_scale(),
            stall_restart: default_stall_restart(),
            optimize_frequencies: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobustnessConfig {
    /// System-size offsets ΔN applied at constant filling.
    #[serde(default = "default_delta_n")]
    pub delta_n: Vec<i64>,
    /// Optional per-size backend switch: sizes above this use the MPS
    /// backend regardless of [backend].kind (exact-basis capacity).
    #[serde(default)]
    pub mps_above_sites: Option<usize>,
}

fn default_delta_n() -> Vec<i64> {
    vec![-2, -1, 0, 1, 2]
}

impl Default for RobustnessConfig {
    fn default() -> Self {
        Self {
            delta_n: default_delta_n(),
            mps_above_sites: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceConfig {
    #[serde(default = "default_m_values")]
    pub m_values: Vec<usize>,
    #[serde(default = "default_dt_values")]
    pub dt_values: Vec<f64>,
    #[serde(default = "default_n_max_values")]
    pub n_max_values: Vec<usize>,
}

fn default_m_values() -> Vec<usize> {
    vec![16, 32, 64, 100]
}

fn default_dt_values() -> Vec<f64> {
    vec![1e-2, 3e-3, 1e-3]
}

fn default_n_max_values() -> Vec<usize> {
    vec![3, 4, 5]
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        Self {
            m_values: default_m_values(),
            dt_values: default_dt_values(),
            n_max_values: default_n_max_values(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitsConfig {
    /// Wall-clock budget per evaluation in seconds (0 = unlimited).
    #[serde(default = "default_eval_timeout")]
    pub eval_timeout_seconds: f64,
    /// Worker threads for parallel dispatch (0 = BHCRAB_WORKERS env or all
    /// cores).
    #[serde(default)]
    pub workers: usize,
}

fn default_eval_timeout() -> f64 {
    1800.0
}

impl Default for LimitsConfig {
    fn default() -> Self {
        Self {
            eval_timeout_seconds: default_eval_timeout(),
            workers: 0,
        }
    }
}

/// A full experiment description.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: ExperimentKind,
    pub output_dir: String,
    pub model: ModelConfig,
    pub control: ControlConfig,
    pub backend: BackendConfig,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub robustness: RobustnessConfig,
    #[serde(default)]
    pub convergence: ConvergenceConfig,
    #[serde(default)]
    pub limits: LimitsConfig,
    /// Use the final ground state's own occupation profile as the defect
    /// reference instead of the nominal filling (trap studies).
    #[serde(default)]
    pub defect_reference_ground: bool,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).context("config does not match the schema")?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        Self::from_toml_str(&text)
    }

    /// Semantic validation beyond the schema.
    pub fn validate(&self) -> Result<()> {
        let params = self.model.lattice_params()?;
        let (b0, b1) = self.control.boundaries()?;
        if b0 <= 0.0 || b1 <= 0.0 {
            bail!("control boundaries must be positive hopping ratios");
        }
        if self.control.t_total <= 0.0 {
            bail!("control.t_total must be positive");
        }
        if self.backend.dt <= 0.0 {
            bail!("backend.dt must be positive");
        }
        if self.backend.dt > self.control.t_total {
            bail!("backend.dt exceeds the total evolution time");
        }
        if !(1e-4..=1.0).contains(&self.backend.dt) {
            log::warn!(
                "backend.dt = {} is outside the usual 1e-3..1e-2 window",
                self.backend.dt
            );
        }
        if matches!(self.backend.kind, BackendKind::Mps) && self.backend.m_max < 1 {
            bail!("backend.m_max must be at least 1");
        }
        if self.optimizer.rho_halt <= 0.0 {
            bail!("optimizer.rho_halt must be positive");
        }
        if self.experiment == ExperimentKind::RobustnessSweep {
            for &dn in &self.robustness.delta_n {
                let n = params.n_sites as i64 + dn;
                if n < 2 {
                    bail!("robustness delta_n {dn} leaves fewer than 2 sites");
                }
            }
        }
        Ok(())
    }

    /// SHA-256 over the canonical JSON form; stamps every output file.
    pub fn content_hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(json.as_bytes());
        hex_string(&hasher.finalize())
    }

    /// Apply a `key.path=value` override onto the TOML representation.
    pub fn with_override(self, dotted: &str) -> Result<Self> {
        let (path, value) = dotted
            .split_once('=')
            .context("override must look like section.key=value")?;
        let mut tree: toml::Value =
            toml::Value::try_from(&self).context("config re-serialization")?;
        let parts: Vec<&str> = path.split('.').collect();
        {
            let mut cursor = &mut tree;
            for (i, part) in parts.iter().enumerate() {
                if i + 1 == parts.len() {
                    let table = cursor
                        .as_table_mut()
                        .with_context(|| format!("{} is not a table", parts[..i].join(".")))?;
                    table.insert(part.to_string(), parse_toml_value(value));
                } else {
                    let table = cursor
                        .as_table_mut()
                        .with_context(|| format!("{} is not a table", parts[..i].join(".")))?;
                    cursor = table
                        .entry(part.to_string())
                        .or_insert(toml::Value::Table(Default::default()));
                }
            }
        }
        let text = toml::to_string(&tree).context("override produced invalid TOML")?;
        Self::from_toml_str(&text)
    }
}

/// Parse a bare TOML literal (`7`, `1e-3`, `true`, `"mps"`, `[1, 2]`);
/// anything unparseable becomes a string.
fn parse_toml_value(text: &str) -> toml::Value {
    let doc = format!("v = {text}");
    if let Ok(toml::Value::Table(mut t)) = doc.parse::<toml::Value>() {
        if let Some(v) = t.remove("v") {
            return v;
        }
    }
    toml::Value::String(text.to_string())
}

pub fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
