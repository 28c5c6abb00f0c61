use clap::Args;
use serde::{Deserialize, Serialize};
use tailsim_core::Distribution;
use tailsim_models::intermittency::{self, Crossover, Provenance, ThresholdModel};

use super::{dist, parse_count, stream, to_json};
use crate::output::{columns, Cell, OutputSet};
use crate::CliError;

/// Laminar-phase length `T` of the threshold model.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct IntermittencyArgs {
    /// Law of the state x [default: uniform]
    #[arg(long = "F")]
    #[serde(rename = "F")]
    pub state: Option<String>,
    /// Law of the threshold y [default: uniform]
    #[arg(long = "G")]
    #[serde(rename = "G")]
    pub threshold: Option<String>,
    /// Probability of keeping the threshold at each step
    #[arg(long)]
    pub eta: Option<f64>,
    /// Monte Carlo episodes [default: 1000000]
    #[arg(long, value_parser = parse_count)]
    #[serde(default, deserialize_with = "super::count")]
    pub episodes: Option<u64>,
    /// Largest T written; longer episodes are censored [default: 100]
    #[arg(long, value_parser = parse_count)]
    #[serde(default, deserialize_with = "super::count")]
    pub tmax: Option<u64>,
    /// Skip the Monte Carlo columns; no seed needed
    #[arg(long, num_args = 0..=1, require_equals = true, default_missing_value = "true")]
    pub oracle_only: Option<bool>,
}

#[derive(Debug, Serialize)]
struct Settings {
    state: Distribution,
    threshold: Distribution,
    eta: f64,
    episodes: Option<u64>,
    tmax: usize,
}

#[derive(Debug, Serialize)]
struct Summary {
    episodes: Option<u64>,
    censored: Option<u64>,
    /// Monte Carlo mass within `0..=tmax`.
    mc_mass: Option<f64>,
    series_mass: f64,
    crossover: Option<Crossover>,
}

pub fn run(args: &IntermittencyArgs, seed: Option<u64>, out: &mut OutputSet) -> Result<serde_json::Value, CliError> {
    let eta = args.eta.ok_or_else(|| CliError::config("`eta` is required"))?;
    let oracle_only = args.oracle_only.unwrap_or(false);
    let s = Settings {
        state: dist("F", args.state.as_deref(), "uniform")?,
        threshold: dist("G", args.threshold.as_deref(), "uniform")?,
        eta,
        episodes: (!oracle_only).then(|| args.episodes.unwrap_or(1_000_000)),
        tmax: args.tmax.unwrap_or(100) as usize,
    };
    let model = ThresholdModel::new(s.state, s.threshold, eta).map_err(CliError::config)?;
    let module_err = |e: intermittency::IntermittencyError| CliError::model("intermittency", e);

    let series = intermittency::pmf_series(&model, s.tmax).map_err(module_err)?;
    let table = intermittency::moments(&model, s.tmax).map_err(module_err)?;
    let mc = match s.episodes {
        Some(n) => Some(intermittency::simulate_episodes(&model, n, s.tmax, stream(seed)?)),
        None => None,
    };
    let se = mc.as_ref().and_then(|p| p.standard_errors());

    out.csv(
        "pmf.csv",
        columns(&[
            ("T", "laminar phase length"),
            ("p_mc", "Monte Carlo frequency of T; empty with --oracle-only"),
            ("p_series", "P(T) from the generating-function series"),
            ("p_lower", "lower bound on P(T) valid for every eta"),
            ("p_upper", "upper bound on P(T) valid for every eta"),
            ("se_mc", "binomial standard error of p_mc"),
        ]),
        (0..=s.tmax).map(|t| {
            let (lo, hi) = intermittency::pmf_bounds(&table, eta, t);
            vec![t.into(), Cell::opt(mc.as_ref().map(|p| p.values[t])), series.values[t].into(), lo.into(), hi.into(), Cell::opt(se.as_ref().map(|v| v[t]))]
        }),
    )?;

    let censored = mc.as_ref().map(|p| match p.provenance {
        Provenance::MonteCarlo { censored, .. } => censored,
        _ => 0,
    });
    let summary = Summary {
        episodes: s.episodes,
        censored,
        mc_mass: mc.as_ref().map(|p| p.values.iter().sum()),
        series_mass: series.values.iter().sum(),
        crossover: (eta > 0.0 && eta < 1.0).then(|| intermittency::crossover(eta).ok()).flatten(),
    };
    out.json("summary.json", &summary)?;
    to_json(&s)
}
