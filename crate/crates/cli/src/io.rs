//! File persistence shared by the subcommands.

use std::fmt::Write as _;
use std::path::Path;

use acflab::domain::{Condition, PerformanceRecord, RECORD_CSV_HEADER};
use acflab::synthlab::SyntheticDataset;
use serde::Serialize;

use crate::error::{CliError, CliResult};

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    write_text(path, &s)
}

pub fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn read_json(path: &Path) -> CliResult<serde_json::Value> {
    serde_json::from_str(&read_text(path)?).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

/// Floats are written in shortest round-trip form.
pub fn dataset_csv(ds: &SyntheticDataset, n_per_condition: usize) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# calibration={} dim={} seed={} n_per_condition={n_per_condition}",
        ds.calibration_name, ds.dim, ds.seed
    );
    out.push_str("id,condition");
    for d in 1..=ds.dim {
        let _ = write!(out, ",x{d}");
    }
    out.push('\n');
    for (i, (row, label)) in ds.rows().zip(&ds.labels).enumerate() {
        let _ = write!(out, "{},{label}", i + 1);
        for x in row {
            let _ = write!(out, ",{x}");
        }
        out.push('\n');
    }
    out
}

/// A dataset as read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedDataset {
    pub dim: usize,
    pub features: Vec<f64>,
    pub labels: Vec<Condition>,
    /// `key=value` pairs from the leading comment line.
    pub meta: Vec<(String, String)>,
}

impl LoadedDataset {
    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

fn parse_meta(text: &str) -> Vec<(String, String)> {
    text.lines()
        .take_while(|l| l.starts_with('#'))
        .flat_map(|l| l.trim_start_matches('#').split_whitespace())
        .filter_map(|kv| kv.split_once('=').map(|(k, v)| (k.to_string(), v.to_string())))
        .collect()
}

pub fn parse_dataset(text: &str, source: &Path) -> CliResult<LoadedDataset> {
    let err = |line: u64, msg: String| CliError::Parse(format!("{}:{line}: {msg}", source.display()));
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| err(1, e.to_string()))?.clone();
    let header_line = rdr.position().line().max(1);
    let dim = headers.len().saturating_sub(2);
    let expected: Vec<String> =
        ["id".to_string(), "condition".to_string()].into_iter().chain((1..=dim).map(|d| format!("x{d}"))).collect();
    if dim == 0 || headers.iter().ne(expected.iter().map(String::as_str)) {
        return Err(err(header_line, format!("expected header {}", expected.join(","))));
    }
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            err(line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let label: Condition = rec[1].parse().map_err(|e: acflab::Error| err(line, e.to_string()))?;
        for field in rec.iter().skip(2) {
            let x: f64 = field.trim().parse().map_err(|_| err(line, format!("bad number {field:?}")))?;
            if !x.is_finite() {
                return Err(err(line, format!("non-finite value {field:?}")));
            }
            features.push(x);
        }
        labels.push(label);
    }
    if labels.is_empty() {
        return Err(err(header_line, "dataset has no rows".into()));
    }
    Ok(LoadedDataset { dim, features, labels, meta: parse_meta(text) })
}

pub fn records_csv(records: &[PerformanceRecord]) -> String {
    let mut out = String::from(RECORD_CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&r.to_csv_row());
        out.push('\n');
    }
    out
}
