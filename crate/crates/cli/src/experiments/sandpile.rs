use std::str::FromStr;

use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tailsim_core::tail::LineFit;
use tailsim_models::sandpile::{self, EnergyAudit, FssOptions, FssSample, LatticeConfig, Model, Observable, SandpileError};

use super::{parse_count, stream, to_json};
use crate::output::{columns, OutputSet};
use crate::CliError;

/// Lattice sides: `64`, `16,32,64`, or a TOML array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SideList {
    One(u64),
    Many(Vec<u64>),
    Text(String),
}

impl SideList {
    pub fn sides(&self) -> Result<Vec<usize>, CliError> {
        let v: Vec<u64> = match self {
            SideList::One(l) => vec![*l],
            SideList::Many(v) => v.clone(),
            SideList::Text(s) => match s.parse::<SideList>()? {
                SideList::Many(v) => v,
                _ => unreachable!("text parses to a list"),
            },
        };
        if v.is_empty() {
            return Err(CliError::config("`L`: no lattice sides given"));
        }
        Ok(v.into_iter().map(|l| l as usize).collect())
    }
}

impl FromStr for SideList {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.split(',')
            .map(|t| t.trim().parse::<u64>().map_err(|_| CliError::config(format!("`L`: `{t}` is not a lattice side"))))
            .collect::<Result<Vec<_>, _>>()
            .map(SideList::Many)
    }
}

fn parse_sides(s: &str) -> Result<SideList, String> {
    s.parse().map_err(|e: CliError| e.to_string())
}

/// Driven sandpile on an open square lattice.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct SandpileArgs {
    /// zhang or btw [default: btw]
    #[arg(long)]
    pub model: Option<String>,
    /// Lattice side, or a comma list for finite-size scaling [default: 64]
    #[arg(long = "L", value_parser = parse_sides)]
    #[serde(rename = "L")]
    pub sides: Option<SideList>,
    /// Recorded avalanches per lattice, after a transient of n/4 [default: 100000]
    #[arg(long, value_parser = parse_count)]
    #[serde(default, deserialize_with = "super::count")]
    pub n: Option<u64>,
    /// Toppling threshold [default: 1]
    #[arg(long)]
    pub ec: Option<f64>,
    /// Integer grains of ec/4 so the energy audit closes exactly (btw only)
    #[arg(long, num_args = 0..=1, require_equals = true, default_missing_value = "true")]
    pub exact: Option<bool>,
    /// Smallest value entering the scaling fits [default: 1]
    #[arg(long)]
    pub x_min: Option<f64>,
    /// Size-density fit window start [default: 10]
    #[arg(long)]
    pub fit_lo: Option<f64>,
    /// Size-density fit window end [default: 1000]
    #[arg(long)]
    pub fit_hi: Option<f64>,
}

#[derive(Debug, Serialize)]
struct Settings {
    model: Model,
    sides: Vec<usize>,
    n: usize,
    ec: f64,
    exact: bool,
    x_min: f64,
    fit_window: (f64, f64),
}

#[derive(Debug, Serialize)]
struct RunSummary {
    side: usize,
    file: String,
    transient: usize,
    audit: EnergyAudit,
    mean_size: f64,
    size_density_fit: Option<LineFit>,
    fit_error: Option<String>,
}

pub fn run(args: &SandpileArgs, seed: Option<u64>, out: &mut OutputSet) -> Result<serde_json::Value, CliError> {
    let model: Model = args.model.as_deref().unwrap_or("btw").parse().map_err(|e| CliError::config(format!("`model`: {e}")))?;
    let s = Settings {
        model,
        sides: args.sides.clone().unwrap_or(SideList::One(64)).sides()?,
        n: args.n.unwrap_or(100_000) as usize,
        ec: args.ec.unwrap_or(1.0),
        exact: args.exact.unwrap_or(false),
        x_min: args.x_min.unwrap_or(1.0),
        fit_window: (args.fit_lo.unwrap_or(10.0), args.fit_hi.unwrap_or(1000.0)),
    };
    if s.exact && model != Model::Btw {
        return Err(CliError::config("`exact` is available for the btw model only"));
    }
    let configs = s.sides.iter().map(|&l| LatticeConfig::of_model(model, l, s.ec)).collect::<Result<Vec<_>, _>>().map_err(CliError::config)?;
    let module_err = |e: SandpileError| CliError::model("sandpile", e);
    let runs = sandpile::run_many(&configs, s.n, stream(seed)?, s.exact).map_err(module_err)?;

    let mut summaries = Vec::with_capacity(runs.len());
    for run in &runs {
        let side = run.config.side;
        let file = if runs.len() == 1 { "avalanches.csv".to_string() } else { format!("avalanches_L{side}.csv") };
        out.csv(
            &file,
            columns(&[
                ("s", "topplings"),
                ("a", "distinct sites that toppled"),
                ("t", "parallel update steps"),
                ("dissipated", "energy lost through the boundary"),
            ]),
            run.records.iter().map(|r| vec![r.size.into(), r.area.into(), r.duration.into(), r.dissipated.into()]),
        )?;
        let fit = sandpile::density_fit(&run.values(Observable::Size), s.fit_window.0, s.fit_window.1, 5);
        summaries.push(RunSummary {
            side,
            file,
            transient: run.transient,
            audit: run.audit,
            mean_size: run.mean_size(),
            fit_error: fit.as_ref().err().map(|e| e.to_string()),
            size_density_fit: fit.ok(),
        });
    }

    let options = FssOptions::discrete(s.x_min);
    let mut fss = serde_json::Map::new();
    for obs in Observable::ALL {
        let entry = if runs.len() < 2 {
            json!({ "error": "finite-size scaling needs at least two lattice sizes" })
        } else {
            let samples: Vec<FssSample> = runs.iter().map(|r| FssSample { side: r.config.side, values: r.values(obs) }).collect();
            match sandpile::fss_fit(&samples, &options) {
                Ok(fit) => to_json(&fit)?,
                Err(e) => json!({ "error": e.to_string() }),
            }
        };
        fss.insert(obs.name().into(), entry);
    }
    out.json("fss.json", &json!({ "options": options, "runs": summaries, "fss": fss }))?;
    to_json(&s)
}
