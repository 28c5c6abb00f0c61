//! Parameter sweeps over a worker pool, and merging of per-cell outputs.
//!
//! A sweep expands a grid of section-key values times a seed list into
//! cells, runs each cell into `OUT/cell-NNNN/`, and records the cells in
//! `OUT/sweep.json`. `collect` stacks one named output across cells.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::config::{overlay, ExperimentConfig};
use crate::experiments;
use crate::output::json_bytes;
use crate::CliError;

pub const SWEEP_FILE: &str = "sweep.json";

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub experiment: String,
    /// Section values shared by every cell.
    pub base: Table,
    /// Swept keys in cell-enumeration order; the last key varies fastest.
    pub grid: Grid,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
    /// Worker threads; rayon's default when absent.
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub index: usize,
    /// Directory relative to the sweep root.
    pub dir: String,
    pub seed: u64,
    pub params: serde_json::Map<String, serde_json::Value>,
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub experiment: String,
    pub seeds: Vec<u64>,
    pub keys: Vec<String>,
    pub cells: Vec<CellRecord>,
}

impl SweepReport {
    pub fn failures(&self) -> usize {
        self.cells.iter().filter(|c| !c.ok).count()
    }
}

/// `A..B` (half-open) or a comma list.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>, CliError> {
    let bad = || CliError::config(format!("`seeds`: expected A..B or a comma list, got `{text}`"));
    if let Some((a, b)) = text.split_once("..") {
        let (a, b): (u64, u64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
        if a >= b {
            return Err(bad());
        }
        return Ok((a..b).collect());
    }
    text.split(',').map(|t| t.trim().parse().map_err(|_| bad())).collect()
}

/// `key=v1;v2;...`. Values are TOML literals or bare strings.
pub fn parse_grid_flag(text: &str) -> Result<(String, Vec<Value>), CliError> {
    let (key, values) = text.split_once('=').ok_or_else(|| CliError::config(format!("`grid`: expected key=v1;v2, got `{text}`")))?;
    let values: Vec<Value> = values.split(';').map(str::trim).filter(|v| !v.is_empty()).map(crate::config::parse_value).collect();
    if values.is_empty() {
        return Err(CliError::config(format!("`grid`: no values for `{key}`")));
    }
    Ok((key.trim().to_string(), values))
}

/// Swept keys with their values, in sweep order.
pub type Grid = Vec<(String, Vec<Value>)>;

/// `seeds`, `jobs` and `grid` of a `[sweep]` block, each optional.
pub type SweepTable = (Option<Vec<u64>>, Option<usize>, Grid);

/// Reads `seeds`, `jobs` and the `grid` table of a `[sweep]` block.
pub fn parse_sweep_table(table: &Table) -> Result<SweepTable, CliError> {
    let mut seeds = None;
    let mut jobs = None;
    let mut grid = Vec::new();
    for (key, value) in table {
        match (key.as_str(), value) {
            ("seeds", Value::String(s)) => seeds = Some(parse_seeds(s)?),
            ("seeds", Value::Array(a)) => {
                seeds = Some(
                    a.iter()
                        .map(|v| v.as_integer().filter(|&i| i >= 0).map(|i| i as u64))
                        .collect::<Option<Vec<_>>>()
                        .ok_or_else(|| CliError::config("`sweep.seeds` must hold nonnegative integers"))?,
                )
            }
            ("jobs", Value::Integer(n)) if *n > 0 => jobs = Some(*n as usize),
            ("grid", Value::Table(t)) => {
                for (k, v) in t {
                    let values = match v {
                        Value::Array(a) if !a.is_empty() => a.clone(),
                        other => return Err(CliError::config(format!("`sweep.grid.{k}` must be a nonempty array, got {other}"))),
                    };
                    grid.push((k.clone(), values));
                }
            }
            _ => return Err(CliError::config(format!("unknown or malformed key `sweep.{key}`"))),
        }
    }
    Ok((seeds, jobs, grid))
}

struct Cell {
    record: CellRecord,
    config: ExperimentConfig,
}

fn toml_to_json(v: &Value) -> serde_json::Value {
    serde_json::to_value(v).unwrap_or(serde_json::Value::Null)
}

fn expand(spec: &SweepSpec) -> Result<Vec<Cell>, CliError> {
    if spec.seeds.is_empty() {
        return Err(CliError::config("a sweep needs at least one seed"));
    }
    let mut combos: Vec<Vec<(String, Value)>> = vec![Vec::new()];
    for (key, values) in &spec.grid {
        combos = combos
            .into_iter()
            .flat_map(|c| {
                values.iter().map(move |v| {
                    let mut c = c.clone();
                    c.push((key.clone(), v.clone()));
                    c
                })
            })
            .collect();
    }
    let mut cells = Vec::new();
    for combo in &combos {
        for &seed in &spec.seeds {
            let index = cells.len();
            let dir = format!("cell-{index:04}");
            let mut section = spec.base.clone();
            overlay(&mut section, combo.iter().cloned().collect());
            let config = ExperimentConfig::from_parts(&spec.experiment, section, Some(seed), Some(spec.out.join(&dir)))
                .map_err(|e| CliError::config(format!("cell {index}: {e}")))?;
            let params = combo.iter().map(|(k, v)| (k.clone(), toml_to_json(v))).collect();
            cells.push(Cell { record: CellRecord { index, dir, seed, params, ok: false, error: None }, config });
        }
    }
    Ok(cells)
}

/// Validates every cell before running any, then runs them in parallel.
/// Cell failures are recorded, not propagated.
pub fn sweep(spec: &SweepSpec) -> Result<SweepReport, CliError> {
    let cells = expand(spec)?;
    std::fs::create_dir_all(&spec.out).map_err(|e| CliError::io(&spec.out, e))?;
    let work = || {
        cells
            .into_par_iter()
            .map(|Cell { mut record, config }| {
                let tag = record.params.clone();
                match experiments::run_cell(&config, Some(tag)) {
                    Ok(_) => record.ok = true,
                    Err(e) => record.error = Some(e.to_string()),
                }
                record
            })
            .collect::<Vec<_>>()
    };
    let records = match spec.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build().map_err(|e| CliError::config(format!("`jobs`: {e}")))?.install(work),
        None => work(),
    };
    let report = SweepReport {
        experiment: spec.experiment.clone(),
        seeds: spec.seeds.clone(),
        keys: spec.grid.iter().map(|(k, _)| k.clone()).collect(),
        cells: records,
    };
    let path = spec.out.join(SWEEP_FILE);
    std::fs::write(&path, json_bytes(&report)?).map_err(|e| CliError::io(&path, e))?;
    Ok(report)
}

pub fn load_report(root: &Path) -> Result<SweepReport, CliError> {
    let path = root.join(SWEEP_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

fn render(v: &serde_json::Value) -> String {
    match v {
        serde_json::Value::String(s) => s.clone(),
        serde_json::Value::Null => String::new(),
        other => other.to_string(),
    }
}

fn flatten(prefix: &str, v: &serde_json::Value, out: &mut Vec<(String, String)>) {
    match v {
        serde_json::Value::Object(m) => {
            for (k, x) in m {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, x, out);
            }
        }
        serde_json::Value::Array(_) => {}
        scalar => out.push((prefix.to_string(), render(scalar))),
    }
}

/// Stacks `file` from every successful cell into one CSV at `dest`, with
/// leading `cell,seed,<swept keys>` columns. CSV inputs must share a
/// header; JSON inputs become one row per cell of their flattened scalar
/// fields (arrays are dropped). Returns the number of data rows.
pub fn collect(root: &Path, file: &str, dest: &Path) -> Result<usize, CliError> {
    let report = load_report(root)?;
    let lead: Vec<String> = ["cell".to_string(), "seed".to_string()].into_iter().chain(report.keys.iter().cloned()).collect();
    let prefix = |c: &CellRecord| -> Vec<String> {
        [c.index.to_string(), c.seed.to_string()].into_iter().chain(report.keys.iter().map(|k| c.params.get(k).map(render).unwrap_or_default())).collect()
    };
    let ok: Vec<&CellRecord> = report.cells.iter().filter(|c| c.ok).collect();
    let mut header: Option<Vec<String>> = None;
    let mut rows: Vec<Vec<String>> = Vec::new();
    if file.ends_with(".json") {
        let mut keys: Vec<String> = Vec::new();
        let mut per_cell: Vec<(Vec<String>, BTreeMap<String, String>)> = Vec::new();
        for c in &ok {
            let path = root.join(&c.dir).join(file);
            let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
            let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
            let mut flat = Vec::new();
            flatten("", &v, &mut flat);
            for (k, _) in &flat {
                if !keys.contains(k) {
                    keys.push(k.clone());
                }
            }
            per_cell.push((prefix(c), flat.into_iter().collect()));
        }
        for (mut row, values) in per_cell {
            row.extend(keys.iter().map(|k| values.get(k).cloned().unwrap_or_default()));
            rows.push(row);
        }
        header = Some(lead.iter().cloned().chain(keys).collect());
    } else {
        for c in &ok {
            let path = root.join(&c.dir).join(file);
            let mut reader = csv::Reader::from_path(&path).map_err(|e| CliError::model("collect", format!("{}: {e}", path.display())))?;
            let cols: Vec<String> = reader.headers().map_err(|e| CliError::model("collect", e))?.iter().map(String::from).collect();
            let full: Vec<String> = lead.iter().cloned().chain(cols).collect();
            match &header {
                Some(h) if *h != full => return Err(CliError::model("collect", format!("{}: header differs from earlier cells", path.display()))),
                _ => header = Some(full),
            }
            for rec in reader.records() {
                let rec = rec.map_err(|e| CliError::model("collect", format!("{}: {e}", path.display())))?;
                rows.push(prefix(c).into_iter().chain(rec.iter().map(String::from)).collect());
            }
        }
    }
    let header = header.unwrap_or(lead);
    if let Some(parent) = dest.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_path(dest)
        .map_err(|e| CliError::model("collect", format!("{}: {e}", dest.display())))?;
    let write_err = |e: csv::Error| CliError::model("collect", format!("{}: {e}", dest.display()));
    w.write_record(&header).map_err(write_err)?;
    for row in &rows {
        w.write_record(row).map_err(write_err)?;
    }
    w.flush().map_err(|e| CliError::io(dest, e))?;
    Ok(rows.len())
}
