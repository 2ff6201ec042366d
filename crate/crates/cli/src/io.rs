//! CSV and JSON artifacts.
//!
//! Floats are written with Rust's shortest round-trip formatting, so reading
//! a CSV back gives bit-identical values.

use std::fs;
use std::path::Path;

use tbnode::model::EpiState;
use tbnode::training::Observations;

use crate::Failure;

fn io_error(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::User(format!("{}: {e}", path.display()))
}

pub fn ensure_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))
}

/// `t,S,L,I,R` or `t,S,L,I,R,T` depending on whether the states carry `T`.
pub fn write_trajectory_csv(path: &Path, times: &[f64], states: &[EpiState]) -> Result<(), Failure> {
    let with_t = states.first().is_some_and(|x| x.t.is_some());
    let mut header = vec!["t", "S", "L", "I", "R"];
    if with_t {
        header.push("T");
    }
    let rows = times.iter().zip(states).map(|(t, x)| {
        let mut row = vec![*t, x.s, x.l, x.i, x.r];
        row.extend(x.t);
        row
    });
    write_rows(path, &header, rows)
}

/// `t` followed by one column per series.
pub fn write_series_csv(path: &Path, times: &[f64], series: &[(&str, &[f64])]) -> Result<(), Failure> {
    let mut header = vec!["t"];
    header.extend(series.iter().map(|(label, _)| *label));
    let rows = times.iter().enumerate().map(|(k, t)| {
        let mut row = vec![*t];
        row.extend(series.iter().map(|(_, v)| v[k]));
        row
    });
    write_rows(path, &header, rows)
}

fn write_rows(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<f64>>) -> Result<(), Failure> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_error(path, e))?;
    w.write_record(header).map_err(|e| io_error(path, e))?;
    for row in rows {
        w.write_record(row.iter().map(|v| v.to_string())).map_err(|e| io_error(path, e))?;
    }
    w.flush().map_err(|e| io_error(path, e))
}

/// Reads observations: a `t` column plus any of `S`, `L`, `I`, `R` (a `T`
/// column is accepted and ignored). Blank cells are unobserved.
pub fn read_observations(path: &Path, start: f64, initial: EpiState) -> Result<Observations, Failure> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| io_error(path, e))?;
    let headers = reader.headers().map_err(|e| io_error(path, e))?.clone();
    let mut time_col = None;
    let mut columns = Vec::new();
    for (k, name) in headers.iter().enumerate() {
        match name.trim() {
            "t" => time_col = Some(k),
            "S" => columns.push((k, 0)),
            "L" => columns.push((k, 1)),
            "I" => columns.push((k, 2)),
            "R" => columns.push((k, 3)),
            "T" => {}
            other => return Err(io_error(path, format!("unknown column `{other}`"))),
        }
    }
    let time_col = time_col.ok_or_else(|| io_error(path, "missing `t` column"))?;
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let line = row + 2;
        let record = record.map_err(|e| io_error(path, e))?;
        let number = |k: usize| -> Result<Option<f64>, Failure> {
            let cell = record.get(k).unwrap_or("").trim();
            if cell.is_empty() {
                return Ok(None);
            }
            cell.parse::<f64>()
                .map(Some)
                .map_err(|_| io_error(path, format!("line {line}: `{cell}` is not a number")))
        };
        let t = number(time_col)?.ok_or_else(|| io_error(path, format!("line {line}: missing time")))?;
        if let Some(&prev) = times.last() {
            if t <= prev {
                return Err(io_error(path, format!("line {line}: time {t} is not after {prev}; times must increase")));
            }
        }
        let mut value = [None; 4];
        for &(k, c) in &columns {
            value[c] = number(k)?;
        }
        times.push(t);
        values.push(value);
    }
    if times.is_empty() {
        return Err(io_error(path, "no observation rows"));
    }
    Observations::new(start, initial, times, values).map_err(|e| io_error(path, e))
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Failure::Internal(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| io_error(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| io_error(path, e))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    fs::write(path, bytes).map_err(|e| io_error(path, e))
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path).map_err(|e| io_error(path, e))
}
