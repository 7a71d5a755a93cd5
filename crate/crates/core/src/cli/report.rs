//! Report documents and their flat CSV renderings.

use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::modepatch::MissingModes;

use super::pipeline::Cell;

/// Run-dependent facts kept apart from the deterministic results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_hash: String,
    pub encoder_fingerprint: Option<String>,
    pub seeds: IndexMap<String, u64>,
    pub workers: usize,
    pub started_unix: u64,
    pub finished_unix: u64,
}

impl Metadata {
    pub fn new(command: &str, config_hash: String) -> Self {
        Metadata {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config_hash,
            encoder_fingerprint: None,
            seeds: IndexMap::new(),
            workers: rayon::current_num_threads(),
            started_unix: unix_now(),
            finished_unix: 0,
        }
    }

    pub fn finish(&mut self) {
        self.finished_unix = unix_now();
    }
}

fn unix_now() -> u64 {
    std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellError {
    pub variant: String,
    pub tau: Option<f64>,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Results {
    pub command: String,
    pub real_train_rows: usize,
    pub real_test_rows: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub missing_modes: Option<MissingModes>,
    pub cells: Vec<Cell>,
    pub errors: Vec<CellError>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub metadata: Metadata,
    pub results: Results,
}

impl MetricReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }
}

/// Canonical text of the results block of a saved report.
pub fn results_text(report_json: &str) -> Result<String> {
    let v: Value = serde_json::from_str(report_json)?;
    let results = v.get("results").ok_or_else(|| Error::Config("report has no results block".into()))?;
    Ok(serde_json::to_string(results)?)
}

const TOP_LEVEL_KEYS: [&str; 2] = ["variant", "tau"];

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    match v {
        Value::Number(n) => out.push((prefix.to_string(), n.to_string())),
        Value::Object(map) => {
            for (k, child) in map {
                if (prefix.is_empty() && TOP_LEVEL_KEYS.contains(&k.as_str())) || k == "trace" {
                    continue;
                }
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, child, out);
            }
        }
        Value::Array(items) => {
            for (i, child) in items.iter().enumerate() {
                flatten(&format!("{prefix}.{i}"), child, out);
            }
        }
        _ => {}
    }
}

fn tau_text(cell: &Value) -> String {
    match cell.get("tau") {
        Some(Value::Number(n)) => n.to_string(),
        _ => "baseline".into(),
    }
}

fn cells(report: &Value) -> Result<&Vec<Value>> {
    report
        .pointer("/results/cells")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Config("report has no results.cells array".into()))
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    Ok(csv::Writer::from_path(path)?)
}

/// `variant,tau,metric,value` with one row per numeric leaf of each cell.
/// Values are the JSON number text, so both files agree bit for bit.
pub fn write_summary_long(report: &Value, path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["variant", "tau", "metric", "value"])?;
    for cell in cells(report)? {
        let variant = cell.get("variant").and_then(Value::as_str).unwrap_or("");
        let tau = tau_text(cell);
        let mut rows = Vec::new();
        flatten("", cell, &mut rows);
        for (metric, value) in rows {
            w.write_record([variant, &tau, &metric, &value])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn number(v: &Value, pointer: &str) -> Option<f64> {
    v.pointer(pointer).and_then(Value::as_f64)
}

fn baseline(cells: &[Value]) -> Option<&Value> {
    cells.iter().find(|c| c.get("tau").is_none_or(Value::is_null))
}

/// Total categorical JS per cell, with the change against the unfiltered cell.
pub fn write_total_js(report: &Value, path: &Path) -> Result<()> {
    let cells = cells(report)?;
    let base = baseline(cells).and_then(|c| number(c, "/fidelity/total_js_bits"));
    let mut w = writer(path)?;
    w.write_record(["variant", "tau", "total_js_bits", "delta_vs_baseline", "pct_delta"])?;
    for cell in cells {
        let Some(total) = number(cell, "/fidelity/total_js_bits") else { continue };
        let (delta, pct) = match base {
            Some(b) if cell.get("tau").is_some_and(|t| !t.is_null()) => {
                let d = total - b;
                (d.to_string(), if b != 0.0 { (100.0 * d / b).to_string() } else { String::new() })
            }
            _ => (String::new(), String::new()),
        };
        let variant = cell.get("variant").and_then(Value::as_str).unwrap_or("");
        w.write_record([variant, &tau_text(cell), &total.to_string(), &delta, &pct])?;
    }
    w.flush()?;
    Ok(())
}

/// Best τ per dependence family: lowest Frobenius difference and highest
/// Spearman, each against the unfiltered cell. Ties list every τ.
pub fn write_best_by_family(report: &Value, path: &Path) -> Result<()> {
    let cells = cells(report)?;
    let mut w = writer(path)?;
    w.write_record([
        "family",
        "baseline_frob",
        "best_frob",
        "best_frob_taus",
        "rel_delta_frob_pct",
        "baseline_spearman",
        "best_spearman",
        "best_spearman_taus",
        "delta_spearman",
    ])?;
    let Some(base) = baseline(cells) else {
        w.flush()?;
        return Ok(());
    };
    let filtered: Vec<&Value> = cells.iter().filter(|c| c.get("tau").is_some_and(|t| !t.is_null())).collect();
    for family in ["pearson", "cramers_v", "eta2"] {
        let frob_ptr = format!("/fidelity/dependence/{family}/frobenius_diff");
        let sp_ptr = format!("/fidelity/dependence/{family}/spearman");
        let Some(base_frob) = number(base, &frob_ptr) else { continue };
        let base_sp = number(base, &sp_ptr);
        let best = |ptr: &str, lower: bool| -> Option<(f64, String)> {
            let vals: Vec<(f64, String)> =
                filtered.iter().filter_map(|c| Some((number(c, ptr)?, tau_text(c)))).collect();
            let pick = vals.iter().map(|v| v.0).reduce(|a, b| if lower { a.min(b) } else { a.max(b) })?;
            let taus: Vec<&str> = vals.iter().filter(|v| v.0 == pick).map(|v| v.1.as_str()).collect();
            Some((pick, taus.join(";")))
        };
        let (bf, bf_taus) = best(&frob_ptr, true).map_or((String::new(), String::new()), |(v, t)| (v.to_string(), t));
        let rel = best(&frob_ptr, true)
            .filter(|_| base_frob != 0.0)
            .map_or(String::new(), |(v, _)| (100.0 * (v - base_frob) / base_frob).to_string());
        let (bs, bs_taus, ds) = match (best(&sp_ptr, false), base_sp) {
            (Some((v, t)), Some(b)) => (v.to_string(), t, (v - b).to_string()),
            (Some((v, t)), None) => (v.to_string(), t, String::new()),
            _ => (String::new(), String::new(), String::new()),
        };
        w.write_record([
            family,
            &base_frob.to_string(),
            &bf,
            &bf_taus,
            &rel,
            &base_sp.map_or(String::new(), |v| v.to_string()),
            &bs,
            &bs_taus,
            &ds,
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// All CSV summaries for a report document.
pub fn write_tables(report: &Value, dir: &Path) -> Result<()> {
    write_summary_long(report, &dir.join("summary_long.csv"))?;
    write_total_js(report, &dir.join("total_js.csv"))?;
    write_best_by_family(report, &dir.join("best_by_family.csv"))
}
