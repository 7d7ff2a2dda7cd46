use std::fmt::Write;
use std::path::Path;

use super::runner::read_manifest;
use crate::error::Result;

/// Human-readable summary of a finished run directory.
pub fn emit_report(run_dir: &Path) -> Result<String> {
    let m = read_manifest(run_dir)?;
    let mut out = String::new();
    let body_id = m
        .body
        .lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| format!("{}={}", k.trim(), v.trim()))
        .filter(|kv| kv.starts_with("kind=") || kv.starts_with("n=") || kv.starts_with("p="))
        .collect::<Vec<_>>()
        .join(" ");
    let _ = writeln!(out, "experiment: {}", m.experiment);
    let _ = writeln!(out, "body:       {body_id}");
    let _ = writeln!(
        out,
        "seed:       {}   workers: {}   wall-clock: {:.2} s",
        m.seed, m.threads, m.wall_clock_seconds
    );
    let _ = writeln!(out, "version:    {}", m.toolkit_version);
    let _ = writeln!(out);
    let width = m
        .summary
        .iter()
        .map(|s| s.name.chars().count())
        .max()
        .unwrap_or(0);
    let _ = writeln!(out, "estimates:");
    for s in &m.summary {
        let pad = width - s.name.chars().count();
        let _ = writeln!(out, "  {}{}  {}", s.name, " ".repeat(pad), s.value);
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "assertions:");
    if m.assertions.is_empty() {
        let _ = writeln!(out, "  (none configured)");
    }
    for a in &m.assertions {
        let verdict = if a.passed { "PASS" } else { "FAIL" };
        let _ = writeln!(out, "  [{verdict}] {}: {}", a.name, a.detail);
    }
    let failed: Vec<&str> = m
        .assertions
        .iter()
        .filter(|a| !a.passed)
        .map(|a| a.name.as_str())
        .collect();
    let _ = writeln!(out);
    if failed.is_empty() {
        let _ = writeln!(out, "verdict: PASS");
    } else {
        let _ = writeln!(out, "verdict: FAIL ({})", failed.join(", "));
    }
    Ok(out)
}
