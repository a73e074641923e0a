//! Report envelopes, tolerance checks and full-precision CSV.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    /// `"<="` or `">="`.
    pub relation: &'static str,
    pub passed: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Check {
            name: name.into(),
            value,
            limit,
            relation: "<=",
            passed: value <= limit,
        }
    }

    pub fn at_least(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Check {
            name: name.into(),
            value,
            limit,
            relation: ">=",
            passed: value >= limit,
        }
    }
}

/// Rows of numbers under a header; written with 17 significant digits.
#[derive(Clone, Debug, Default)]
pub struct Csv {
    pub header: Vec<String>,
    pub rows: Vec<Vec<CsvCell>>,
}

#[derive(Clone, Debug)]
pub enum CsvCell {
    Num(f64),
    Int(usize),
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Csv {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn render(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            for (i, cell) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                match cell {
                    CsvCell::Num(v) => write!(out, "{}", full_precision(*v)),
                    CsvCell::Int(v) => write!(out, "{v}"),
                }
                .expect("writing to a String");
            }
            out.push('\n');
        }
        out
    }
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn full_precision(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

/// Result of one experiment, before the envelope is added.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub name: String,
    pub kind: &'static str,
    pub results: Value,
    pub checks: Vec<Check>,
    /// `(file suffix, table)`; written as `<name>_<suffix>.csv`.
    pub csv: Vec<(String, Csv)>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Provenance shared by every report of a run.
#[derive(Clone, Debug, Serialize)]
pub struct Envelope {
    pub tool: &'static str,
    pub version: &'static str,
    pub library_version: &'static str,
    pub config: String,
    pub config_sha256: String,
    pub seed: u64,
    pub tolerance_profile: String,
    pub tolerances: Value,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Unix seconds; the only field that differs between identical runs.
pub fn timestamp() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

pub fn report_json(env: &Envelope, body: Value) -> Value {
    let mut v = serde_json::to_value(env).expect("envelope serializes");
    let map = v.as_object_mut().expect("envelope is an object");
    if let Value::Object(b) = body {
        map.extend(b);
    }
    map.insert("generated_at".into(), Value::from(timestamp()));
    v
}

pub fn outcome_json(env: &Envelope, o: &Outcome) -> Value {
    report_json(
        env,
        serde_json::json!({
            "experiment": o.name,
            "kind": o.kind,
            "passed": o.passed(),
            "checks": o.checks,
            "results": o.results,
        }),
    )
}

pub fn write_json(path: &Path, v: &Value) -> std::io::Result<()> {
    let mut text = serde_json::to_string_pretty(v).expect("json values serialize");
    text.push('\n');
    std::fs::write(path, text)
}

pub fn write_outcome(dir: &Path, env: &Envelope, o: &Outcome) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    write_json(&dir.join(format!("{}.json", o.name)), &outcome_json(env, o))?;
    for (suffix, csv) in &o.csv {
        std::fs::write(dir.join(format!("{}_{suffix}.csv", o.name)), csv.render())?;
    }
    Ok(())
}
