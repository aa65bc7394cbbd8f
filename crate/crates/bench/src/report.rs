//! Comparison tables and objective curves from finished runs.
//!
//! `table.*` has one row per run. `curves.*` has one row per scored trace
//! entry: `Ĵ` and the mean return against mask size, per trial.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::experiment::{read_record, read_traces, ResultRecord, Timings, TraceLine};
use crate::{BenchError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
    Markdown,
}

impl Format {
    pub fn extension(&self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
            Format::Markdown => "md",
        }
    }
}

impl std::str::FromStr for Format {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "markdown" | "markdown-table" | "md" => Ok(Format::Markdown),
            _ => Err(BenchError::Config(format!("unknown report format `{s}`"))),
        }
    }
}

/// A finished run as read back from disk.
#[derive(Clone, Debug)]
pub struct LoadedRun {
    pub record: ResultRecord,
    pub timings: Option<Timings>,
    pub traces: Vec<TraceLine>,
}

impl LoadedRun {
    pub fn new(record: ResultRecord) -> Self {
        LoadedRun {
            record,
            timings: None,
            traces: Vec::new(),
        }
    }
}

/// Loads a run directory or a `results.json` path, with its sibling
/// `timings.json` and `traces.jsonl` when present.
pub fn load_run(path: &Path) -> Result<LoadedRun> {
    let results: PathBuf = if path.is_dir() {
        path.join("results.json")
    } else {
        path.to_path_buf()
    };
    let record = read_record(&results)?;
    let dir = results.parent().unwrap_or(Path::new("."));
    let timings_path = dir.join("timings.json");
    let timings = if timings_path.exists() {
        let text = std::fs::read_to_string(&timings_path).map_err(|e| BenchError::io(&timings_path, e))?;
        let t: Timings =
            serde_json::from_str(&text).map_err(|e| BenchError::format(&timings_path, e.to_string()))?;
        (t.config_hash == record.config_hash).then_some(t)
    } else {
        None
    };
    let traces_path = dir.join("traces.jsonl");
    let traces = if traces_path.exists() {
        read_traces(&traces_path)?
    } else {
        Vec::new()
    };
    Ok(LoadedRun {
        record,
        timings,
        traces,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub name: String,
    pub domain: String,
    pub algorithm: String,
    pub lambda: f64,
    pub n_trials: usize,
    pub n_ok: usize,
    pub n_failed: usize,
    pub mean_return: Option<f64>,
    pub stderr_return: Option<f64>,
    pub mean_j_hat: Option<f64>,
    pub mean_mask_size: Option<f64>,
    pub modal_mask: Option<String>,
    pub modal_count: usize,
    pub total_successes: Option<u64>,
    pub mean_search_secs: Option<f64>,
}

pub const TABLE_HEADER: [&str; 15] = [
    "name",
    "domain",
    "algorithm",
    "lambda",
    "n_trials",
    "n_ok",
    "n_failed",
    "mean_return",
    "stderr_return",
    "mean_j_hat",
    "mean_mask_size",
    "modal_mask",
    "modal_count",
    "total_successes",
    "mean_search_secs",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub name: String,
    pub domain: String,
    pub algorithm: String,
    pub lambda: f64,
    pub trial: usize,
    pub iteration: usize,
    pub mask: String,
    pub mask_size: usize,
    pub accepted: bool,
    pub j_hat: f64,
    pub mean_return: f64,
}

pub const CURVE_HEADER: [&str; 11] = [
    "name",
    "domain",
    "algorithm",
    "lambda",
    "trial",
    "iteration",
    "mask",
    "mask_size",
    "accepted",
    "j_hat",
    "mean_return",
];

pub fn table_row(run: &LoadedRun) -> TableRow {
    let r = &run.record;
    let a = &r.aggregate;
    TableRow {
        name: r.name.clone(),
        domain: r.domain.clone(),
        algorithm: r.algorithm.to_string(),
        lambda: r.lambda,
        n_trials: r.n_trials,
        n_ok: a.n_ok,
        n_failed: a.n_failed,
        mean_return: a.mean_return,
        stderr_return: a.stderr_return,
        mean_j_hat: a.mean_j_hat,
        mean_mask_size: a.mean_mask_size,
        modal_mask: a.modal_mask.as_ref().map(|m| m.to_string()),
        modal_count: a.modal_count,
        total_successes: a.total_successes,
        mean_search_secs: run.timings.as_ref().map(|t| t.mean_search_secs),
    }
}

pub fn curve_rows(run: &LoadedRun) -> Vec<CurveRow> {
    let r = &run.record;
    let mut rows = Vec::new();
    for line in &run.traces {
        let Some(trace) = &line.trace else { continue };
        for e in &trace.entries {
            let Some(score) = &e.score else { continue };
            rows.push(CurveRow {
                name: r.name.clone(),
                domain: r.domain.clone(),
                algorithm: r.algorithm.to_string(),
                lambda: r.lambda,
                trial: line.trial,
                iteration: e.iteration,
                mask: e.candidate.to_string(),
                mask_size: e.candidate.len(),
                accepted: e.accepted,
                j_hat: score.j_hat,
                mean_return: score.mean_return,
            });
        }
    }
    rows
}

fn render_csv<T: Serialize>(header: &[&str], rows: &[T]) -> String {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.serialize(row).expect("report rows are flat");
    }
    String::from_utf8(w.into_inner().expect("in-memory write")).expect("utf-8")
}

fn render_json<T: Serialize>(rows: &[T]) -> String {
    let mut s = serde_json::to_string_pretty(rows).expect("report rows serialize");
    s.push('\n');
    s
}

fn cell(v: &serde_json::Value) -> String {
    match v {
        serde_json::Value::Null => String::new(),
        serde_json::Value::String(s) => s.clone(),
        serde_json::Value::Number(n) => match n.as_f64() {
            Some(x) if !n.is_i64() && !n.is_u64() => format!("{x:.4}"),
            _ => n.to_string(),
        },
        other => other.to_string(),
    }
}

fn render_markdown<T: Serialize>(header: &[&str], rows: &[T]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "| {} |", header.join(" | "));
    let _ = writeln!(s, "|{}", "---|".repeat(header.len()));
    for row in rows {
        let v = serde_json::to_value(row).expect("report rows serialize");
        let cells: Vec<String> = header.iter().map(|k| cell(&v[*k])).collect();
        let _ = writeln!(s, "| {} |", cells.join(" | "));
    }
    s
}

fn render<T: Serialize>(format: Format, header: &[&str], rows: &[T]) -> String {
    match format {
        Format::Csv => render_csv(header, rows),
        Format::Json => render_json(rows),
        Format::Markdown => render_markdown(header, rows),
    }
}

/// Rendered `(table, curves)` for `runs`.
pub fn render_report(runs: &[LoadedRun], format: Format) -> (String, String) {
    let table: Vec<TableRow> = runs.iter().map(table_row).collect();
    let curves: Vec<CurveRow> = runs.iter().flat_map(curve_rows).collect();
    (
        render(format, &TABLE_HEADER, &table),
        render(format, &CURVE_HEADER, &curves),
    )
}

/// Writes `table.<ext>` and `curves.<ext>` into `out`. Returns their paths.
pub fn emit_report(runs: &[LoadedRun], format: Format, out: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out).map_err(|e| BenchError::io(out, e))?;
    let (table, curves) = render_report(runs, format);
    let mut written = Vec::new();
    for (stem, body) in [("table", table), ("curves", curves)] {
        let path = out.join(format!("{stem}.{}", format.extension()));
        std::fs::write(&path, body).map_err(|e| BenchError::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_input_is_header_only() {
        let (table, curves) = render_report(&[], Format::Csv);
        assert_eq!(table.lines().count(), 1);
        assert!(table.starts_with("name,domain,algorithm,lambda"));
        assert_eq!(curves.lines().count(), 1);
        let (table, _) = render_report(&[], Format::Markdown);
        assert_eq!(table.lines().count(), 2);
        let (table, _) = render_report(&[], Format::Json);
        assert_eq!(table.trim(), "[]");
    }

    #[test]
    fn formats_parse() {
        assert_eq!("markdown".parse::<Format>().unwrap(), Format::Markdown);
        assert_eq!("markdown-table".parse::<Format>().unwrap(), Format::Markdown);
        assert!("xml".parse::<Format>().is_err());
    }
}
