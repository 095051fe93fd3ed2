//! Helpers shared by the CLI test targets: running the binary and
//! validating exported artifacts.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

/// Columns holding labels rather than numbers.
const TEXT_COLUMNS: &[&str] = &["case_label", "pass", "matched_root"];

/// Top-level keys every echoed configuration carries.
const CONFIG_KEYS: &[&str] =
    &["command", "chart", "params", "grid", "jets", "fd_step", "format", "tolerance", "fluid", "renorm", "multid"];

pub fn isoflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_isoflow")).args(args).output().expect("binary runs")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().unwrap_or(-1)
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Every regular file below `dir`, by name.
pub fn read_dir(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    if let Ok(entries) = std::fs::read_dir(dir) {
        for e in entries.flatten() {
            if e.file_type().map(|t| t.is_file()).unwrap_or(false) {
                files.insert(e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap());
            }
        }
    }
    files
}

fn text(bytes: &[u8], name: &str) -> Result<String, String> {
    let s = String::from_utf8(bytes.to_vec()).map_err(|_| format!("{name}: not UTF-8"))?;
    if s.contains('\r') {
        return Err(format!("{name}: CR in line endings"));
    }
    if !s.ends_with('\n') {
        return Err(format!("{name}: missing final newline"));
    }
    Ok(s)
}

/// Header of unique names, rectangular rows, numeric cells outside the label
/// columns. Returns the header and row count.
pub fn check_csv(bytes: &[u8], name: &str) -> Result<(Vec<String>, usize), String> {
    let s = text(bytes, name)?;
    let mut rdr = csv::Reader::from_reader(s.as_bytes());
    let header: Vec<String> = rdr.headers().map_err(|e| format!("{name}: {e}"))?.iter().map(String::from).collect();
    let mut seen = std::collections::BTreeSet::new();
    if header.iter().any(|h| h.is_empty() || !seen.insert(h.clone())) {
        return Err(format!("{name}: empty or repeated column in {header:?}"));
    }
    let mut rows = 0;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| format!("{name}: {e}"))?;
        if rec.len() != header.len() {
            return Err(format!("{name}: row {rows} has {} fields, header has {}", rec.len(), header.len()));
        }
        for (col, cell) in header.iter().zip(rec.iter()) {
            if !TEXT_COLUMNS.contains(&col.as_str()) && cell.parse::<f64>().is_err() {
                return Err(format!("{name}: column {col} holds non-numeric `{cell}`"));
            }
        }
        rows += 1;
    }
    Ok((header, rows))
}

/// `{"columns": [...], "rows": [[...]]}` with rectangular rows.
pub fn check_json_table(bytes: &[u8], name: &str) -> Result<(Vec<String>, usize), String> {
    let v: Value = serde_json::from_str(&text(bytes, name)?).map_err(|e| format!("{name}: {e}"))?;
    let cols: Vec<String> = v["columns"]
        .as_array()
        .ok_or(format!("{name}: no columns"))?
        .iter()
        .map(|c| c.as_str().map(String::from).ok_or(format!("{name}: column name not a string")))
        .collect::<Result<_, _>>()?;
    let rows = v["rows"].as_array().ok_or(format!("{name}: no rows"))?;
    for (i, r) in rows.iter().enumerate() {
        let r = r.as_array().ok_or(format!("{name}: row {i} not an array"))?;
        if r.len() != cols.len() {
            return Err(format!("{name}: row {i} has {} cells", r.len()));
        }
        for (col, cell) in cols.iter().zip(r) {
            let ok = if TEXT_COLUMNS.contains(&col.as_str()) { cell.is_string() } else { cell.is_number() || cell.is_null() };
            if !ok {
                return Err(format!("{name}: column {col} holds {cell}"));
            }
        }
    }
    Ok((cols, rows.len()))
}

/// Report layout: tool, version, command, full config echo, residual
/// entries and a verdict consistent with the failure list.
pub fn check_report(bytes: &[u8], command: &str) -> Result<Value, String> {
    let v: Value = serde_json::from_str(&text(bytes, "report.json")?).map_err(|e| format!("report.json: {e}"))?;
    if v["tool"] != "isoflow" || v["version"] != isoflow::VERSION || v["command"] != command {
        return Err(format!("report header: tool {} version {} command {}", v["tool"], v["version"], v["command"]));
    }
    let cfg = v["config"].as_object().ok_or("report.json: config echo missing")?;
    if let Some(k) = CONFIG_KEYS.iter().find(|k| !cfg.contains_key(**k)) {
        return Err(format!("report.json: config echo lacks `{k}`"));
    }
    if cfg["command"] != command {
        return Err("report.json: echoed command differs".into());
    }
    let entries = v["residuals"]["residuals"].as_array().ok_or("report.json: residual list missing")?;
    for e in entries {
        let ok = e["name"].is_string()
            && (e["value"].is_number() || e["value"].is_null())
            && (e["tolerance"].is_number() || e["tolerance"].is_null())
            && (e["pass"].is_boolean() || e["pass"].is_null());
        if !ok {
            return Err(format!("report.json: malformed residual entry {e}"));
        }
    }
    let failures = v["failures"].as_array().ok_or("report.json: failure list missing")?;
    match v["verdict"].as_str() {
        Some("pass") if failures.is_empty() => Ok(v),
        Some("fail") if !failures.is_empty() => Ok(v),
        other => Err(format!("report.json: verdict {other:?} with {} failures", failures.len())),
    }
}

/// Validates every artifact in `dir`: the report plus each table.
pub fn check_artifacts(dir: &Path, command: &str) -> Result<usize, String> {
    let files = read_dir(dir);
    let report = files.get("report.json").ok_or(format!("{}: no report.json", dir.display()))?;
    check_report(report, command)?;
    for (name, bytes) in &files {
        if name.ends_with(".tmp") {
            return Err(format!("leftover temporary file {name}"));
        } else if name.ends_with(".csv") {
            check_csv(bytes, name)?;
        } else if name != "report.json" && name.ends_with(".json") {
            check_json_table(bytes, name)?;
        }
    }
    Ok(files.len())
}
