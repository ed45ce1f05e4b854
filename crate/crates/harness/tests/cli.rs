//! End-to-end CLI checks: exit codes, file layout, hash stamping, and
//! trace determinism, all on second-scale configs.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_bhcrab")
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("run.toml");
    std::fs::write(&path, body).unwrap();
    path
}

fn tiny_config(out: &Path) -> String {
    format!(
        r#"
experiment = "optimize"
output_dir = "{}"

[model]
n_sites = 4

[control]
t_total = 2.0
n_modes = 1

[backend]
kind = "exact"
dt = 1e-2

[optimizer]
budget = 8
rho_halt = 1.0
seed = 7
restarts = 0
"#,
        out.display()
    )
}

#[test]
fn check_validates_and_prints_hash() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &tiny_config(&dir.path().join("out")));
    let out = Command::new(bin())
        .args(["check", "-c"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.starts_with("ok "));
    assert_eq!(text.trim().len(), 3 + 64, "expects ok + sha256 hex");
}

#[test]
fn check_rejects_invalid_config() {
    let dir = tempfile::tempdir().unwrap();
    let bad = tiny_config(&dir.path().join("out")).replace("n_sites = 4", "n_sites = 1");
    let cfg = write_config(dir.path(), &bad);
    let out = Command::new(bin())
        .args(["check", "-c"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn optimize_halts_at_threshold_with_exit_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let cfg = write_config(dir.path(), &tiny_config(&out_dir));
    // rho_halt = 1.0 halts on the very first evaluation
    let out = Command::new(bin())
        .args(["optimize", "-c"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(2),
        "stdout: {} stderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    for f in ["run.json", "trace.tsv", "pulse.dat", "guess_pulse.dat", "profile.dat", "pulse.gp"] {
        assert!(out_dir.join(f).exists(), "{f} missing");
    }
    let trace = std::fs::read_to_string(out_dir.join("trace.tsv")).unwrap();
    // hash header + column header + exactly one evaluation row
    assert_eq!(trace.lines().count(), 3, "trace:\n{trace}");
}

#[test]
fn optimize_budget_exhaustion_is_exit_code_3() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let body = tiny_config(&out_dir).replace("rho_halt = 1.0", "rho_halt = 1e-12");
    let cfg = write_config(dir.path(), &body);
    let out = Command::new(bin())
        .args(["optimize", "-c"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn identical_seeds_give_byte_identical_trace_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    let body = tiny_config(&dir.path().join("unused"))
        .replace("rho_halt = 1.0", "rho_halt = 1e-9")
        .replace("budget = 8", "budget = 20");
    let cfg = write_config(dir.path(), &body);
    for out_dir in [&out_a, &out_b] {
        let st = Command::new(bin())
            .args(["optimize", "-c"])
            .arg(&cfg)
            .arg("--out")
            .arg(out_dir)
            .status()
            .unwrap();
        assert_eq!(st.code(), Some(3));
    }
    let ta = std::fs::read(out_a.join("trace.tsv")).unwrap();
    let tb = std::fs::read(out_b.join("trace.tsv")).unwrap();
    assert!(!ta.is_empty());
    // The hash header differs (output_dir is part of the config), so compare
    // from the first newline on.
    let body_a = &ta[ta.iter().position(|&b| b == b'\n').unwrap()..];
    let body_b = &tb[tb.iter().position(|&b| b == b'\n').unwrap()..];
    assert_eq!(body_a, body_b, "trace tables differ between identical runs");
}

#[test]
fn evaluate_pulse_and_robustness_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let opt_dir = dir.path().join("opt");
    let cfg = write_config(dir.path(), &tiny_config(&opt_dir));
    let st = Command::new(bin())
        .args(["optimize", "-c"])
        .arg(&cfg)
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(2));

    // evaluate the stored pulse
    let eval_dir = dir.path().join("eval");
    let out = Command::new(bin())
        .args(["evaluate-pulse", "-c"])
        .arg(&cfg)
        .arg("--out")
        .arg(&eval_dir)
        .arg("--pulse-from")
        .arg(opt_dir.join("run.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    // robustness rows at ΔN ∈ {-1, 0, 1}
    let rob_dir = dir.path().join("rob");
    let out = Command::new(bin())
        .args(["robustness-sweep", "-c"])
        .arg(&cfg)
        .arg("--out")
        .arg(&rob_dir)
        .arg("--pulse-from")
        .arg(opt_dir.join("run.json"))
        .arg("--set")
        .arg("robustness.delta_n=[-1, 0, 1]")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let table = std::fs::read_to_string(rob_dir.join("robustness.tsv")).unwrap();
    let rows: Vec<&str> = table.lines().skip(2).collect();
    assert_eq!(rows.len(), 3);
    for row in rows {
        assert!(!row.contains("nan"), "row failed: {row}");
    }
}

#[test]
fn tampered_record_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let opt_dir = dir.path().join("opt");
    let cfg = write_config(dir.path(), &tiny_config(&opt_dir));
    let st = Command::new(bin())
        .args(["optimize", "-c"])
        .arg(&cfg)
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(2));
    let record_path = opt_dir.join("run.json");
    let text = std::fs::read_to_string(&record_path).unwrap();
    std::fs::write(&record_path, text.replace("\"n_sites\": 4", "\"n_sites\": 5")).unwrap();
    let out = Command::new(bin())
        .args(["robustness-sweep", "-c"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("rob"))
        .arg("--pulse-from")
        .arg(&record_path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("hash mismatch"), "stderr: {err}");
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let cfg = write_config(dir.path(), &tiny_config(&out_dir));
    let st = Command::new(bin())
        .args(["optimize", "-c"])
        .arg(&cfg)
        .arg("--seed")
        .arg("123")
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(2));
    let record = std::fs::read_to_string(out_dir.join("run.json")).unwrap();
    assert!(record.contains("\"seed\": 123"));
}
