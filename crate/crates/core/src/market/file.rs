//! Portfolio description files.
//!
//! ```text
//! d = 4
//! s0 = 100
//! mu = 0.08
//! mu0 = 0.05
//! strikes = 95
//! maturity = 0.1
//! tau = 0.02
//! option_kind = call
//! covariance = exponential     # exponential | triangular | file
//! # covariance_file = cov.csv  (with covariance = file, relative to this file)
//! ```
//!
//! Per-asset keys (`s0`, `strikes`, `option_kind`) take either one value for
//! every asset or a comma-separated list of `d` values.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;

use super::{build_covariance, CovarianceKind, OptionKind, Portfolio};
use crate::error::{Error, Result};

const KEYS: [&str; 10] = [
    "d",
    "s0",
    "mu",
    "mu0",
    "strikes",
    "maturity",
    "tau",
    "option_kind",
    "covariance",
    "covariance_file",
];

struct Entry {
    line: usize,
    value: String,
}

/// Reads a portfolio file; a relative `covariance_file` is resolved against
/// the directory of `path`.
pub fn read_portfolio(path: &Path) -> Result<Portfolio> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_portfolio(&text, path, base)
}

/// Parses portfolio text. `origin` names the source in error messages.
pub fn parse_portfolio(text: &str, origin: &Path, base: &Path) -> Result<Portfolio> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        message,
    };
    let mut entries: BTreeMap<&str, Entry> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| parse_err(line, format!("expected key = value, got '{content}'")))?;
        let key = key.trim();
        let Some(&known) = KEYS.iter().find(|k| **k == key) else {
            return Err(parse_err(line, format!("unknown key '{key}'")));
        };
        let entry = Entry {
            line,
            value: value.trim().to_string(),
        };
        if entries.insert(known, entry).is_some() {
            return Err(parse_err(line, format!("duplicate key '{key}'")));
        }
    }

    let get = |key: &str| {
        entries
            .get(key)
            .ok_or_else(|| Error::Config(format!("{}: missing key '{key}'", origin.display())))
    };
    let scalar = |key: &str| -> Result<f64> {
        let e = get(key)?;
        e.value
            .parse::<f64>()
            .map_err(|_| parse_err(e.line, format!("'{key}' must be a number, got '{}'", e.value)))
    };

    let d_entry = get("d")?;
    let d: usize = d_entry
        .value
        .parse()
        .ok()
        .filter(|&d| d >= 1)
        .ok_or_else(|| parse_err(d_entry.line, format!("'d' must be a positive integer, got '{}'", d_entry.value)))?;

    let per_asset = |key: &str| -> Result<(usize, Vec<String>)> {
        let e = get(key)?;
        let items: Vec<String> = e.value.split(',').map(|s| s.trim().to_string()).collect();
        match items.len() {
            1 => Ok((e.line, vec![items[0].clone(); d])),
            n if n == d => Ok((e.line, items)),
            n => Err(parse_err(e.line, format!("'{key}' has {n} values, expected 1 or {d}"))),
        }
    };
    let numbers = |key: &str| -> Result<Vec<f64>> {
        let (line, items) = per_asset(key)?;
        items
            .iter()
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| parse_err(line, format!("'{key}' entry '{s}' is not a number")))
            })
            .collect()
    };

    let s0 = numbers("s0")?;
    let strikes = numbers("strikes")?;
    let (kind_line, kind_items) = per_asset("option_kind")?;
    let kinds = kind_items
        .iter()
        .map(|s| s.parse::<OptionKind>().map_err(|e| parse_err(kind_line, e.to_string())))
        .collect::<Result<Vec<_>>>()?;

    let cov_entry = get("covariance")?;
    let covariance = match cov_entry.value.to_ascii_lowercase().as_str() {
        "file" => {
            let f = get("covariance_file")?;
            let path = base.join(&f.value);
            read_matrix(&path, d)?
        }
        other => {
            let kind: CovarianceKind = other
                .parse()
                .map_err(|e: Error| parse_err(cov_entry.line, e.to_string()))?;
            if let Some(f) = entries.get("covariance_file") {
                return Err(parse_err(
                    f.line,
                    "'covariance_file' is only allowed with covariance = file".into(),
                ));
            }
            build_covariance(kind, d)?
        }
    };

    Portfolio::with_covariance(
        s0,
        scalar("mu")?,
        scalar("mu0")?,
        &covariance,
        strikes,
        scalar("maturity")?,
        scalar("tau")?,
        kinds,
    )
}

fn read_matrix(path: &PathBuf, d: usize) -> Result<DMatrix<f64>> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.clone(),
        source,
    })?;
    let err = |line: usize, message: String| Error::Parse {
        path: path.clone(),
        line,
        message,
    };
    let mut values = Vec::with_capacity(d * d);
    let mut rows = 0;
    for (idx, raw) in text.lines().enumerate() {
        let content = raw.trim();
        if content.is_empty() || content.starts_with('#') {
            continue;
        }
        let row: Vec<f64> = content
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| err(idx + 1, format!("malformed row '{content}'")))?;
        if row.len() != d {
            return Err(err(idx + 1, format!("row has {} entries, expected {d}", row.len())));
        }
        values.extend(row);
        rows += 1;
    }
    if rows != d {
        return Err(err(0, format!("matrix has {rows} rows, expected {d}")));
    }
    Ok(DMatrix::from_row_slice(d, d, &values))
}
