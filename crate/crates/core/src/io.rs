//! Dataset CSV and JSON file exchange.
//!
//! CSV layout: header `y,x1,...,xp`, one observation per row, every value
//! written with 17 significant digits so doubles round-trip exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::models::Dataset;

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn dataset_to_csv(data: &Dataset) -> String {
    let mut out = String::from("y");
    for j in 1..=data.p() {
        write!(out, ",x{j}").unwrap();
    }
    out.push('\n');
    for i in 0..data.n() {
        write!(out, "{:.16e}", data.y[i]).unwrap();
        for v in data.x.row(i).iter() {
            write!(out, ",{v:.16e}").unwrap();
        }
        out.push('\n');
    }
    out
}

/// Parses CSV text; `path` is only used in error messages.
pub fn dataset_from_csv(text: &str, path: &Path) -> Result<Dataset> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
    let (_, header) = lines.next().ok_or_else(|| parse_err(path, 1, "empty file"))?;
    let names: Vec<&str> = header.split(',').map(str::trim).collect();
    if names.len() < 2 || names[0] != "y" || names[1..].iter().enumerate().any(|(j, n)| *n != format!("x{}", j + 1)) {
        return Err(parse_err(path, 1, format!("expected header y,x1,...,xp, got {header:?}")));
    }
    let p = names.len() - 1;
    let mut ys = Vec::new();
    let mut xs = Vec::new();
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != p + 1 {
            return Err(parse_err(path, lineno, format!("expected {} fields, found {}", p + 1, fields.len())));
        }
        for (k, f) in fields.iter().enumerate() {
            let v: f64 = f
                .trim()
                .parse()
                .map_err(|_| parse_err(path, lineno, format!("field {} is not a number: {f:?}", k + 1)))?;
            if !v.is_finite() {
                return Err(parse_err(path, lineno, format!("field {} is not finite", k + 1)));
            }
            if k == 0 {
                ys.push(v);
            } else {
                xs.push(v);
            }
        }
    }
    if ys.is_empty() {
        return Err(parse_err(path, 2, "no observations"));
    }
    let n = ys.len();
    Dataset::new(DMatrix::from_row_slice(n, p, &xs), ys)
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    dataset_from_csv(&read_text(path)?, path)
}

pub fn write_dataset(path: &Path, data: &Dataset) -> Result<()> {
    write_text(path, &dataset_to_csv(data))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| parse_err(path, e.line(), e.to_string()))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable value");
    text.push('\n');
    write_text(path, &text)
}
