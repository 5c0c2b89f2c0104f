//! Run-directory summaries: one line per verification item with measured
//! value, threshold, and verdict; plain status for other experiment kinds.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};

/// Parsed view of an acceptance ledger row.
#[derive(Debug, Clone)]
pub struct AcceptanceRow {
    pub criterion: usize,
    pub title: String,
    pub check: String,
    pub measured: f64,
    pub threshold: f64,
    pub pass: bool,
}

pub fn parse_acceptance_csv(text: &str) -> Result<Vec<AcceptanceRow>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 6 {
            bail!("malformed acceptance row {}: {line}", i + 1);
        }
        rows.push(AcceptanceRow {
            criterion: cols[0].parse().context("criterion id")?,
            title: cols[1].to_string(),
            check: cols[2].to_string(),
            measured: cols[3].parse().context("measured value")?,
            threshold: cols[4].parse().context("threshold")?,
            pass: cols[5].parse().context("pass flag")?,
        });
    }
    Ok(rows)
}

/// Render the per-criterion summary table. Returns the lines and whether
/// everything passed.
pub fn acceptance_summary(rows: &[AcceptanceRow]) -> (Vec<String>, bool) {
    let mut grouped: BTreeMap<usize, Vec<&AcceptanceRow>> = BTreeMap::new();
    for r in rows {
        grouped.entry(r.criterion).or_default().push(r);
    }
    let mut lines = Vec::new();
    let mut all_pass = true;
    for (id, group) in &grouped {
        let pass = group.iter().all(|r| r.pass);
        all_pass &= pass;
        let title = &group[0].title;
        let passed = group.iter().filter(|r| r.pass).count();
        let mut line = format!(
            "[{}] {:02} {} — {passed}/{} checks",
            if pass { "PASS" } else { "FAIL" },
            id,
            title,
            group.len()
        );
        if let Some(bad) = group.iter().find(|r| !r.pass) {
            line.push_str(&format!(
                " (failed: {} = {} vs threshold {})",
                bad.check, bad.measured, bad.threshold
            ));
        }
        lines.push(line);
    }
    (lines, all_pass)
}

/// Summarize a completed run directory. Returns the process exit code:
/// zero only when the run succeeded and, for acceptance runs, every
/// criterion passed.
pub fn emit_report(dir: &Path) -> Result<i32> {
    let manifest_path = dir.join("manifest.toml");
    if !manifest_path.exists() {
        bail!("no ledgers found in {dir:?}");
    }
    let manifest_text = std::fs::read_to_string(&manifest_path)?;
    let manifest: toml::Table = toml::from_str(&manifest_text)?;
    let status = manifest.get("status").and_then(|v| v.as_str()).unwrap_or("unknown");
    let kind = manifest.get("kind").and_then(|v| v.as_str()).unwrap_or("unknown");
    let seed = manifest.get("seed").and_then(|v| v.as_integer()).unwrap_or(-1);
    println!("run: kind={kind} seed={seed} status={status}");
    if let Some(err) = manifest.get("error").and_then(|v| v.as_str()) {
        println!("error: {err}");
    }

    let acceptance_path = dir.join("acceptance.csv");
    if acceptance_path.exists() {
        let rows = parse_acceptance_csv(&std::fs::read_to_string(&acceptance_path)?)?;
        let (lines, all_pass) = acceptance_summary(&rows);
        for line in &lines {
            println!("{line}");
        }
        return Ok(if all_pass && status == "ok" { 0 } else { 1 });
    }

    // Non-acceptance runs: list the ledgers that were produced.
    let mut ledgers: Vec<String> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|name| name.ends_with(".csv"))
        .collect();
    ledgers.sort();
    if ledgers.is_empty() && status == "ok" {
        bail!("no ledgers found in {dir:?}");
    }
    for name in &ledgers {
        println!("ledger: {name}");
    }
    Ok(if status == "ok" { 0 } else { 1 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_groups_rows() {
        let text = "criterion,title,check,measured,threshold,pass\n\
                    1,kernel,mass,0.000000001,0.00000001,true\n\
                    1,kernel,law,0.0,0.0000000001,true\n\
                    2,yosida,lip,0.5,0.0,false\n";
        let rows = parse_acceptance_csv(text).unwrap();
        assert_eq!(rows.len(), 3);
        let (lines, all_pass) = acceptance_summary(&rows);
        assert_eq!(lines.len(), 2);
        assert!(!all_pass);
        assert!(lines[0].starts_with("[PASS] 01"));
        assert!(lines[1].starts_with("[FAIL] 02"));
        assert!(lines[1].contains("lip"));
    }

    #[test]
    fn missing_dir_is_an_error() {
        let err = emit_report(Path::new("/definitely/not/here")).unwrap_err();
        assert!(err.to_string().contains("no ledgers"));
    }
}
