//! Persisted run products: the structured run record plus the line-oriented
//! tables consumed by regression tests and plot scripts.

use anyhow::{bail, Context, Result};
use bhcrab::crab::{OptimizeStatus, PulseSpec, TraceEntry};
use bhcrab::observables::SiteProfile;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

/// Best-pulse trajectory samples in all three scales.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PulseSamples {
    pub times: Vec<f64>,
    pub ratios: Vec<f64>,
    pub depths: Vec<f64>,
}

/// Summary of SVD truncation over an MPS evolution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruncationSummary {
    pub cumulative_discarded: f64,
    pub max_single_gate: f64,
    pub max_bond_dim: usize,
}

/// How a run ended; maps onto the process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Success,
    HaltedAtThreshold,
    BudgetExhausted,
}

impl RunStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::Success => 0,
            RunStatus::HaltedAtThreshold => 2,
            RunStatus::BudgetExhausted => 3,
        }
    }
}

impl From<OptimizeStatus> for RunStatus {
    fn from(s: OptimizeStatus) -> Self {
        match s {
            OptimizeStatus::HaltedAtThreshold => RunStatus::HaltedAtThreshold,
            OptimizeStatus::BudgetExhausted => RunStatus::BudgetExhausted,
            OptimizeStatus::Converged => RunStatus::Success,
        }
    }
}

/// The self-describing document persisted as `run.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub version: String,
    pub config_hash: String,
    pub config_snapshot: RunConfig,
    pub status: RunStatus,
    pub seed: u64,
    /// Optimization trace (empty for non-optimize experiments). Wall times
    /// live only here; the trace table on disk carries the deterministic
    /// columns.
    pub evaluation_trace: Vec<TraceEntry<f64>>,
    pub best_spec: Option<PulseSpec<f64>>,
    pub best_pulse: Option<PulseSamples>,
    pub best_defect_density: Option<f64>,
    pub best_residual_energy: Option<f64>,
    pub final_profile: Option<SiteProfile<f64>>,
    pub truncation_summary: Option<TruncationSummary>,
    /// Which method produced the target ground energy (exact
    /// diagonalization at desk scale, DMRG for larger systems).
    pub ground_energy_method: String,
    pub evaluations: usize,
}

impl RunRecord {
    pub fn save(&self, dir: &std::path::Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join("run.json");
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(&path, json)
            .with_context(|| format!("cannot write {}", path.display()))?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read {}", path.display()))?;
        let record: RunRecord = serde_json::from_str(&text)?;
        // Hash integrity: the stored hash must match the embedded snapshot.
        let recomputed = record.config_snapshot.content_hash();
        if recomputed != record.config_hash {
            bail!(
                "config hash mismatch in {}: stored {} vs recomputed {}",
                path.display(),
                record.config_hash,
                recomputed
            );
        }
        Ok(record)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_config() -> RunConfig {
        RunConfig::from_toml_str(
            r#"
experiment = "optimize"
output_dir = "out"
[model]
n_sites = 4
[control]
t_total = 2.0
[backend]
kind = "exact"
"#,
        )
        .unwrap()
    }

    #[test]
    fn record_round_trips_and_checks_hash() {
        let dir = std::env::temp_dir().join(format!("bhcrab-rec-{}", std::process::id()));
        let cfg = minimal_config();
        let record = RunRecord {
            version: env!("CARGO_PKG_VERSION").into(),
            config_hash: cfg.content_hash(),
            config_snapshot: cfg,
            status: RunStatus::Success,
            seed: 42,
            evaluation_trace: vec![],
            best_spec: None,
            best_pulse: None,
            best_defect_density: None,
            best_residual_energy: None,
            final_profile: None,
            truncation_summary: None,
            ground_energy_method: "exact-diagonalization".into(),
            evaluations: 0,
        };
        record.save(&dir).unwrap();
        let loaded = RunRecord::load(&dir.join("run.json")).unwrap();
        assert_eq!(loaded.config_hash, record.config_hash);

        // Tampering with the snapshot must be detected.
        let path = dir.join("run.json");
        let text = std::fs::read_to_string(&path).unwrap();
        let tampered = text.replace("\"n_sites\": 4", "\"n_sites\": 6");
        std::fs::write(&path, tampered).unwrap();
        assert!(RunRecord::load(&path).is_err());
        let _ = std::fs::remove_dir_all(&dir);
    }

    #[test]
    fn exit_codes_match_contract() {
        assert_eq!(RunStatus::Success.exit_code(), 0);
        assert_eq!(RunStatus::HaltedAtThreshold.exit_code(), 2);
        assert_eq!(RunStatus::BudgetExhausted.exit_code(), 3);
    }
}
