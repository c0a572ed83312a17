//! Canonical, byte-reproducible report output.
//!
//! Every JSON report is an envelope `{schema, kind, config_hash, seeds,
//! payload}` with object keys sorted and floats written as `{:.16e}`, so two
//! runs of the same config produce identical bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::sweep::{BoundReport, GaussianityReport, TailReport};
use crate::campaign::LangevinReport;

pub const SCHEMA: &str = "sgnlab-report/1";

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema: &'a str,
    kind: &'a str,
    config_hash: String,
    seeds: Value,
    payload: &'a T,
}

/// Serializes `value` with sorted keys and fixed float formatting.
pub fn canonical_json<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value).map_err(|e| CliError::Config(format!("serialization failed: {e}")))?;
    let mut out = String::new();
    write_value(&v, 0, &mut out);
    out.push('\n');
    Ok(out)
}

fn write_value(v: &Value, indent: usize, out: &mut String) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                write!(out, "{i}").unwrap();
            } else if let Some(u) = n.as_u64() {
                write!(out, "{u}").unwrap();
            } else {
                write!(out, "{:.16e}", n.as_f64().unwrap_or(f64::NAN)).unwrap();
            }
        }
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            // scalar arrays stay on one line
            if items.iter().all(|x| !x.is_array() && !x.is_object()) {
                out.push('[');
                for (i, x) in items.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    write_value(x, indent, out);
                }
                out.push(']');
                return;
            }
            out.push_str("[\n");
            for (i, x) in items.iter().enumerate() {
                pad(indent + 1, out);
                write_value(x, indent + 1, out);
                out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
            }
            pad(indent, out);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push_str("{\n");
            for (i, k) in keys.iter().enumerate() {
                pad(indent + 1, out);
                out.push_str(&Value::String((*k).clone()).to_string());
                out.push_str(": ");
                write_value(&map[*k], indent + 1, out);
                out.push_str(if i + 1 < keys.len() { ",\n" } else { "\n" });
            }
            pad(indent, out);
            out.push('}');
        }
    }
}

fn pad(indent: usize, out: &mut String) {
    for _ in 0..indent {
        out.push_str("  ");
    }
}

/// Writes reports into one directory, naming files `<kind>-<hash prefix>.<ext>`.
pub struct ReportWriter {
    dir: PathBuf,
    hash: String,
    seeds: Value,
}

impl ReportWriter {
    pub fn new(dir: impl Into<PathBuf>, config: &ExperimentConfig) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        let seeds: std::collections::BTreeMap<_, _> = config.seeds().into_iter().collect();
        let seeds = serde_json::to_value(seeds).unwrap_or(Value::Null);
        Ok(ReportWriter { dir, hash: config.hash(), seeds })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn config_hash(&self) -> &str {
        &self.hash
    }

    pub fn path(&self, kind: &str, ext: &str) -> PathBuf {
        self.dir.join(format!("{kind}-{}.{ext}", &self.hash[..12]))
    }

    pub fn envelope<T: Serialize>(&self, kind: &str, payload: &T) -> Result<String> {
        canonical_json(&Envelope { schema: SCHEMA, kind, config_hash: self.hash.clone(), seeds: self.seeds.clone(), payload })
    }

    pub fn write_json<T: Serialize>(&self, kind: &str, payload: &T) -> Result<PathBuf> {
        let text = self.envelope(kind, payload)?;
        self.write_text(kind, "json", &text)
    }

    pub fn write_text(&self, kind: &str, ext: &str, text: &str) -> Result<PathBuf> {
        let path = self.path(kind, ext);
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }

    pub fn write_bytes(&self, kind: &str, ext: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.path(kind, ext);
        fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }
}

fn csv_text(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let to_err = |e: csv::Error| CliError::Config(format!("csv: {e}"));
    w.write_record(header).map_err(to_err)?;
    for r in rows {
        w.write_record(&r).map_err(to_err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Config(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn gaussianity_csv(report: &GaussianityReport) -> Result<String> {
    csv_text(
        &["layer", "batch_size", "checkpoint_epoch", "tested", "gaussian", "dirac", "non_gaussian", "percentage"],
        report.rows.iter().map(|r| {
            vec![
                r.layer.to_string(),
                r.batch_size.to_string(),
                r.checkpoint_epoch.to_string(),
                r.tested.to_string(),
                r.gaussian.to_string(),
                r.dirac.to_string(),
                r.non_gaussian.to_string(),
                num(r.percentage),
            ]
        }),
    )
}

/// One row per layer and configured quantile level.
pub fn bounds_csv(report: &BoundReport) -> Result<String> {
    let mut rows = Vec::new();
    for l in &report.layers {
        for (i, &(p, b)) in l.beta_ratio.quantiles.iter().enumerate() {
            let k = l.kurtosis_bound.quantiles.get(i).map(|q| q.1);
            rows.push(vec![l.layer.to_string(), l.tested.to_string(), l.dirac.to_string(), num(p), num(b), opt(k)]);
        }
    }
    csv_text(&["layer", "tested", "dirac", "probability", "beta_ratio", "kurtosis_bound"], rows)
}

pub fn tail_csv(report: &TailReport) -> Result<String> {
    csv_text(
        &["layer", "batch_size", "coordinates", "skipped", "q25_alpha", "median_alpha", "q75_alpha", "heavy_fraction"],
        report.rows.iter().map(|r| {
            vec![
                r.layer.to_string(),
                r.batch_size.to_string(),
                r.coordinates.to_string(),
                r.skipped.to_string(),
                opt(r.q25_alpha),
                opt(r.median_alpha),
                opt(r.q75_alpha),
                opt(r.heavy_fraction),
            ]
        }),
    )
}

pub fn marginals_csv(report: &LangevinReport) -> Result<String> {
    csv_text(
        &["coordinate", "variable", "analytic_std", "total_variation", "outside"],
        report.marginals.iter().map(|m| {
            vec![m.coordinate.to_string(), m.variable.clone(), num(m.analytic_std), num(m.total_variation), num(m.outside)]
        }),
    )
}
