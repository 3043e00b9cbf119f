//! Plot-ready CSV (`x,y,yerr`) and JSON sidecar output.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::HarnessError;
use crate::sweep::SweepTable;

pub const CSV_HEADER: &str = "x,y,yerr";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io { path: path.display().to_string(), source }
}

/// CSV text with one row per grid value that has a finite mean.
///
/// Floats use the shortest representation that parses back to the same
/// value, so identical tables give identical bytes.
pub fn csv_text(table: &SweepTable) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for (x, y, e) in table.points() {
        out.push_str(&format!("{x:?},{y:?},{e:?}\n"));
    }
    out
}

pub fn write_csv(table: &SweepTable, path: &Path) -> Result<(), HarnessError> {
    fs::write(path, csv_text(table)).map_err(io_err(path))
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), HarnessError> {
    let mut text = serde_json::to_string_pretty(value).expect("results serialize");
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

/// Writes `<stem>.csv` and `<stem>.json` into `dir`; returns both paths.
pub fn write_results(table: &SweepTable, dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf), HarnessError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let csv = dir.join(format!("{stem}.csv"));
    let json = dir.join(format!("{stem}.json"));
    write_csv(table, &csv)?;
    write_json(table, &json)?;
    Ok((csv, json))
}

/// Reads an `x,y,yerr` file.
pub fn read_csv(path: &Path) -> Result<Vec<(f64, f64, f64)>, HarnessError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_csv(&text)
}

pub fn parse_csv(text: &str) -> Result<Vec<(f64, f64, f64)>, HarnessError> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == CSV_HEADER => {}
        other => {
            return Err(HarnessError::Config(format!("expected header `{CSV_HEADER}`, found {other:?}")));
        }
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            let parse =
                |s: &str| s.parse::<f64>().map_err(|e| HarnessError::Config(format!("line {}: `{s}`: {e}", i + 2)));
            match cols.as_slice() {
                [x, y, e] => Ok((parse(x)?, parse(y)?, parse(e)?)),
                _ => Err(HarnessError::Config(format!("line {}: expected 3 columns", i + 2))),
            }
        })
        .collect()
}
