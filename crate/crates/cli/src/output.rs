//! CSV/JSON emission with checksums, and the run manifest.

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

pub const MANIFEST: &str = "manifest.json";

/// One CSV field. Floats print with 17 significant digits so every value
/// reads back bit-exactly.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Uint(u64),
    Text(String),
    Empty,
}

impl Cell {
    pub fn opt(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Float)
    }

    fn render(&self) -> String {
        match self {
            Cell::Float(x) if x.is_finite() => format!("{x:.16e}"),
            Cell::Float(x) => x.to_string(),
            Cell::Int(i) => i.to_string(),
            Cell::Uint(u) => u.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<u64> for Cell {
    fn from(x: u64) -> Self {
        Cell::Uint(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Uint(x as u64)
    }
}

impl From<u32> for Cell {
    fn from(x: u32) -> Self {
        Cell::Uint(x.into())
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::Uint(x.into())
    }
}

/// Header name and meaning of one CSV column.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Column {
    pub name: String,
    pub doc: String,
}

pub fn columns(spec: &[(&str, &str)]) -> Vec<Column> {
    spec.iter().map(|&(name, doc)| Column { name: name.into(), doc: doc.into() }).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputEntry {
    pub file: String,
    pub sha256: String,
    pub bytes: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rows: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub columns: Option<Vec<Column>>,
}

/// Files written by one run, in write order.
#[derive(Debug)]
pub struct OutputSet {
    dir: PathBuf,
    entries: Vec<OutputEntry>,
}

impl OutputSet {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self { dir: dir.to_path_buf(), entries: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn entries(&self) -> &[OutputEntry] {
        &self.entries
    }

    pub fn csv<I>(&mut self, name: &str, columns: Vec<Column>, rows: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = Vec<Cell>>,
    {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
        let csv_err = |e: csv::Error| CliError::model("output", format!("{name}: {e}"));
        w.write_record(columns.iter().map(|c| c.name.as_str())).map_err(csv_err)?;
        let mut count = 0u64;
        for row in rows {
            debug_assert_eq!(row.len(), columns.len(), "{name}");
            w.write_record(row.iter().map(Cell::render)).map_err(csv_err)?;
            count += 1;
        }
        let bytes = w.into_inner().map_err(|e| CliError::model("output", format!("{name}: {e}")))?;
        self.write(name, bytes, Some(count), Some(columns))
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let bytes = json_bytes(value)?;
        self.write(name, bytes, None, None)
    }

    pub fn text(&mut self, name: &str, text: String) -> Result<(), CliError> {
        self.write(name, text.into_bytes(), None, None)
    }

    fn write(&mut self, name: &str, bytes: Vec<u8>, rows: Option<u64>, columns: Option<Vec<Column>>) -> Result<(), CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, &bytes).map_err(|e| CliError::io(&path, e))?;
        self.entries.push(OutputEntry { file: name.into(), sha256: sha256_hex(&bytes), bytes: bytes.len() as u64, rows, columns });
        Ok(())
    }
}

pub fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::model("output", e))?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// `manifest.json`. Everything except the two timing fields is a function
/// of (config, seed, version).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub experiment: &'static str,
    pub seed: Option<u64>,
    pub config: serde_json::Value,
    pub started_unix_seconds: f64,
    pub wall_clock_seconds: f64,
    pub outputs: Vec<OutputEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cell: Option<serde_json::Map<String, serde_json::Value>>,
}

impl RunManifest {
    pub fn checksum(&self, file: &str) -> Option<&str> {
        self.outputs.iter().find(|o| o.file == file).map(|o| o.sha256.as_str())
    }
}

/// Wall-clock bookkeeping for a manifest.
#[derive(Debug, Clone, Copy)]
pub struct Clock {
    started: SystemTime,
    timer: Instant,
}

impl Clock {
    pub fn start() -> Self {
        Self { started: SystemTime::now(), timer: Instant::now() }
    }

    pub fn started_unix_seconds(&self) -> f64 {
        self.started.duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
    }

    pub fn elapsed_seconds(&self) -> f64 {
        self.timer.elapsed().as_secs_f64()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, 6.02214076e23, -2.5e-300, f64::MIN_POSITIVE] {
            let s = Cell::Float(x).render();
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
        }
        assert_eq!(Cell::Float(0.5).render(), "5.0000000000000000e-1");
    }
}
