//! Flat CSV output shared by every serialized artifact.
//!
//! Floats are written with six decimals, undefined values as `NA`, one
//! record per line with LF terminators.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

pub const NA: &str = "NA";

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.6}")
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| NA.to_string(), fmt_f64)
}

/// Parses a cell written by [`fmt_opt`].
pub fn parse_opt(cell: &str) -> Option<f64> {
    if cell == NA {
        None
    } else {
        cell.parse().ok()
    }
}

/// Writes `header` and `rows` to any writer as CSV.
pub fn write_csv<W: Write>(out: W, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Writes a CSV file. An empty `rows` produces a header-only file.
pub fn emit_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(std::io::BufWriter::new(file), header, rows)
}

/// A CSV file read back into memory, addressed by column name.
#[derive(Debug, Clone)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn read(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingRun(path.display().to_string()));
        }
        let mut r = csv::Reader::from_path(path)?;
        let header = r.headers()?.iter().map(str::to_string).collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|rec| rec.iter().map(str::to_string).collect()))
            .collect::<std::result::Result<_, _>>()?;
        Ok(Self { header, rows })
    }

    pub fn column(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingRun(format!("column `{name}`")))
    }
}
