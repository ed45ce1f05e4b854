//! Line-oriented output tables and gnuplot stubs. Every file starts with the
//! config hash so stale artifacts are detected on re-analysis.

use anyhow::{bail, Context, Result};
use bhcrab::crab::TraceEntry;
use bhcrab::observables::SiteProfile;
use std::fmt::Write as _;
use std::path::Path;

use crate::record::PulseSamples;

/// Floats are printed with full round-trip precision so identical runs give
/// byte-identical tables.
fn fmt_f(x: f64) -> String {
    format!("{x:.17e}")
}

pub fn write_with_hash(path: &Path, hash: &str, body: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let text = format!("# config_sha256: {hash}\n{body}");
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

/// Check the hash header of a previously written table.
pub fn verify_hash(path: &Path, expected: &str) -> Result<()> {
    let text = std::fs::read_to_string(path)?;
    let first = text.lines().next().unwrap_or_default();
    let Some(found) = first.strip_prefix("# config_sha256: ") else {
        bail!("{} carries no config hash header", path.display());
    };
    if found != expected {
        bail!(
            "config hash mismatch for {}: file {} vs expected {}",
            path.display(),
            found,
            expected
        );
    }
    Ok(())
}

/// Deterministic optimization trace: no wall-clock column.
pub fn trace_table(entries: &[TraceEntry<f64>]) -> String {
    let mut out = String::from("# index\trestart\trho\tresidual_energy_per_site\tclamped\tcoefficients...\n");
    for e in entries {
        let coeffs: Vec<String> = e.coefficients.iter().map(|&c| fmt_f(c)).collect();
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}",
            e.index,
            e.restart,
            fmt_f(e.defect_density),
            fmt_f(e.residual_energy_per_site),
            u8::from(e.clamped),
            coeffs.join("\t")
        );
    }
    out
}

/// Best-pulse trajectory in all scales.
pub fn pulse_table(p: &PulseSamples) -> String {
    let mut out = String::from("# t_hbar_over_U\tratio_J_over_U\tdepth_V_over_Er\n");
    for i in 0..p.times.len() {
        let _ = writeln!(
            out,
            "{}\t{}\t{}",
            fmt_f(p.times[i]),
            fmt_f(p.ratios[i]),
            fmt_f(p.depths[i])
        );
    }
    out
}

pub fn profile_table(profile: &SiteProfile<f64>) -> String {
    let mut out = String::from("# site\toccupation\tfluctuation\n");
    for i in 0..profile.n_sites() {
        let _ = writeln!(
            out,
            "{}\t{}\t{}",
            i + 1,
            fmt_f(profile.occupations[i]),
            fmt_f(profile.fluctuations[i])
        );
    }
    out
}

/// Generic labeled table: header names then rows of floats with a leading
/// label column.
pub fn labeled_table(columns: &[&str], rows: &[(String, Vec<f64>)]) -> String {
    let mut out = format!("# label\t{}\n", columns.join("\t"));
    for (label, vals) in rows {
        let cells: Vec<String> = vals.iter().map(|&v| fmt_f(v)).collect();
        let _ = writeln!(out, "{label}\t{}", cells.join("\t"));
    }
    out
}

/// Gnuplot stub for the pulse figure: guess vs optimal ramp in depth scale,
/// with the occupation/fluctuation inset data alongside.
pub fn pulse_plot_stub() -> &'static str {
    r#"set terminal pdfcairo size 9cm,7cm
set output 'pulse.pdf'
set xlabel 't [hbar/U]'
set ylabel 'V/E_r'
plot 'guess_pulse.dat' using 1:3 with lines dashtype 2 lc 'black' title 'initial guess', \
     'pulse.dat' using 1:3 with lines lc 'red' title 'optimal ramp'
set output 'profile.pdf'
set xlabel 'site i'
set ylabel 'occupation / fluctuation'
plot 'profile.dat' using 1:2 with points pt 6 title '<n_i>', \
     'profile.dat' using 1:3 with points pt 7 lc 'red' title '<dn_i^2>'
"#
}

/// Gnuplot stub for the defect-density comparison table.
pub fn defects_plot_stub(table: &str, xlabel: &str) -> String {
    format!(
        r#"set terminal pdfcairo size 9cm,7cm
set output 'defects.pdf'
set logscale y
set xlabel '{xlabel}'
set ylabel 'defect density rho'
plot '{table}' using 2:3 with linespoints pt 5 title 'rho'
"#
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tables_are_deterministic() {
        let entries = vec![TraceEntry {
            index: 0,
            restart: 0,
            coefficients: vec![0.1, -0.2],
            defect_density: 0.05,
            residual_energy_per_site: 0.11,
            clamped: false,
            wall_seconds: 123.0,
        }];
        let a = trace_table(&entries);
        let b = trace_table(&entries);
        assert_eq!(a, b);
        assert!(!a.contains("123"), "wall time must not leak into the table");
    }

    #[test]
    fn hash_header_round_trip() {
        let dir = std::env::temp_dir().join(format!("bhcrab-persist-{}", std::process::id()));
        let path = dir.join("x.tsv");
        write_with_hash(&path, "abc123", "payload\n").unwrap();
        verify_hash(&path, "abc123").unwrap();
        assert!(verify_hash(&path, "other").is_err());
        let _ = std::fs::remove_dir_all(&dir);
    }
}
