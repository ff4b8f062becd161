//! Price series CSV files: header `date,close`, ISO-8601 dates, decimal
//! prices. A directory of such files is a universe.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use gsls_core::PriceSeries;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// A file that could not be loaded, and why.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadFailure {
    pub path: PathBuf,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct Universe {
    pub series: Vec<PriceSeries>,
    pub failures: Vec<LoadFailure>,
}

fn symbol_of(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "series".into())
}

/// Reads and validates one series. The symbol is the file stem. Row numbers
/// in errors are file line numbers (the header is line 1).
pub fn load_series(path: &Path) -> Result<PriceSeries> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file);
    let display = path.display();
    let headers = reader
        .headers()
        .map_err(|e| CliError::Data(format!("{display}: {e}")))?
        .clone();
    if headers.len() != 2 || &headers[0] != "date" || &headers[1] != "close" {
        if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
            return Err(CliError::Data(format!("{display}: file is empty")));
        }
        return Err(CliError::Data(format!(
            "{display}: expected header 'date,close', found '{}'",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut dates = Vec::new();
    let mut prices = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| CliError::Data(format!("{display}: line {line}: {e}")))?;
        if record.len() != 2 {
            return Err(CliError::Data(format!(
                "{display}: line {line}: expected 2 fields"
            )));
        }
        let date = record[0].parse::<NaiveDate>().map_err(|e| {
            CliError::Data(format!(
                "{display}: line {line}: bad date '{}': {e}",
                &record[0]
            ))
        })?;
        let price = record[1].parse::<f64>().map_err(|e| {
            CliError::Data(format!(
                "{display}: line {line}: bad price '{}': {e}",
                &record[1]
            ))
        })?;
        if !(price.is_finite() && price > 0.0) {
            return Err(CliError::Data(format!(
                "{display}: line {line}: price must be positive, got {price}"
            )));
        }
        if let Some(prev) = dates.last() {
            if date <= *prev {
                return Err(CliError::Data(format!(
                    "{display}: line {line}: date {date} does not follow {prev}"
                )));
            }
        }
        dates.push(date);
        prices.push(price);
    }
    if prices.is_empty() {
        return Err(CliError::Data(format!("{display}: no data rows")));
    }
    Ok(PriceSeries::new(symbol_of(path), dates, prices)?)
}

/// Loads every `*.csv` in `dir`, in file-name order. Files that fail to load
/// are reported, not fatal. A directory without CSV files is a usage error.
pub fn load_universe(dir: &Path) -> Result<Universe> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    let mut paths = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| CliError::io(dir, e))?.path();
        if path.is_file() && path.extension().is_some_and(|x| x == "csv") {
            paths.push(path);
        }
    }
    if paths.is_empty() {
        return Err(CliError::Usage(format!(
            "no .csv series found in {}",
            dir.display()
        )));
    }
    paths.sort();
    let mut series = Vec::new();
    let mut failures = Vec::new();
    for path in paths {
        match load_series(&path) {
            Ok(s) => series.push(s),
            Err(e) => failures.push(LoadFailure {
                message: e.to_string(),
                path,
            }),
        }
    }
    Ok(Universe { series, failures })
}

pub fn write_series(path: &Path, series: &PriceSeries) -> Result<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e| CliError::io(path, e);
    writeln!(w, "date,close").map_err(io_err)?;
    for (date, price) in series.dates().iter().zip(series.prices()) {
        writeln!(w, "{date},{price}").map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Runtime(format!("serializing {}: {e}", path.display())))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}
