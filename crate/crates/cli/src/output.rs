//! Number formatting and file writing shared by the artifact writers.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::error::{CliError, Result};

/// Rounds to 6 significant digits.
pub fn sig6(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.5e}").parse().unwrap_or(x)
}

/// Text form of a number as written to CSV files.
pub fn num(x: f64) -> String {
    let r = sig6(x);
    if r == 0.0 {
        "0".to_string()
    } else {
        r.to_string()
    }
}

/// Rounds every float inside a JSON value to 6 significant digits; integers
/// are left alone.
pub fn round_json(v: &mut Value) {
    match v {
        Value::Number(n) if !(n.is_i64() || n.is_u64()) => {
            if let Some(f) = n.as_f64() {
                if let Some(r) = serde_json::Number::from_f64(sig6(f)) {
                    *n = r;
                }
            }
        }
        Value::Array(a) => a.iter_mut().for_each(round_json),
        Value::Object(o) => o.values_mut().for_each(round_json),
        _ => {}
    }
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T, rounded: bool) -> Result<()> {
    let mut v = serde_json::to_value(value).expect("serializable artifact");
    if rounded {
        round_json(&mut v);
    }
    let mut s = serde_json::to_string_pretty(&v).expect("serializable artifact");
    s.push('\n');
    write_file(path, &s)
}

/// Builds CSV text from a header and rows of already formatted cells.
pub fn csv_text(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}

pub fn read_to_string(path: &Path) -> Result<String> {
    match std::fs::read_to_string(path) {
        Ok(s) => Ok(s),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(CliError::MissingArtifact {
            path: path.to_path_buf(),
        }),
        Err(e) => Err(CliError::io(path, e)),
    }
}
