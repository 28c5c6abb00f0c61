use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use tailsim_core::tail::TailFit;
use tailsim_core::Distribution;
use tailsim_models::langevin::{self, LangevinParams, DEFAULT_BURN_IN, DEFAULT_STRIDE};

use super::{dist, parse_count, stream, to_json};
use crate::output::{columns, Cell, OutputSet};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LangevinMode {
    /// `trajectory.csv` with `t,x`.
    Trajectory,
    /// `samples.csv` with `x` only.
    Sample,
}

/// `x(t+1) = b(t) x(t) + f(t)`.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct LangevinArgs {
    /// Law of the multiplier b [default: uniform:lo=0,hi=1.2]
    #[arg(long)]
    pub b: Option<String>,
    /// Law of the zero-mean forcing f [default: normal]
    #[arg(long)]
    pub f: Option<String>,
    /// Iterations including burn-in [default: 1000000]
    #[arg(long, value_parser = parse_count)]
    #[serde(default, deserialize_with = "super::count")]
    pub steps: Option<u64>,
    #[arg(long, value_parser = parse_count)]
    #[serde(default, deserialize_with = "super::count")]
    pub burn_in: Option<u64>,
    /// Keep every stride-th post-burn-in value
    #[arg(long, value_parser = parse_count)]
    #[serde(default, deserialize_with = "super::count")]
    pub stride: Option<u64>,
    #[arg(long)]
    pub x0: Option<f64>,
    #[arg(long, value_enum)]
    pub mode: Option<LangevinMode>,
    /// Add running and stationary second-moment columns
    #[arg(long, num_args = 0..=1, require_equals = true, default_missing_value = "true")]
    pub oracle: Option<bool>,
}

#[derive(Debug, Serialize)]
struct Settings {
    b: Distribution,
    f: Distribution,
    steps: u64,
    burn_in: u64,
    stride: u64,
    x0: f64,
    mode: LangevinMode,
    oracle: bool,
}

#[derive(Debug, Serialize)]
struct Summary {
    b2: f64,
    f2: f64,
    recorded: usize,
    m2_running: f64,
    m2_stationary: Option<f64>,
    m2_relative_error: Option<f64>,
    tail: Option<TailFit>,
    tail_error: Option<String>,
}

pub fn run(args: &LangevinArgs, seed: Option<u64>, out: &mut OutputSet) -> Result<serde_json::Value, CliError> {
    let s = Settings {
        b: dist("b", args.b.as_deref(), "uniform:lo=0,hi=1.2")?,
        f: dist("f", args.f.as_deref(), "normal")?,
        steps: args.steps.unwrap_or(1_000_000),
        burn_in: args.burn_in.unwrap_or(DEFAULT_BURN_IN),
        stride: args.stride.unwrap_or(DEFAULT_STRIDE),
        x0: args.x0.unwrap_or(0.0),
        mode: args.mode.unwrap_or(LangevinMode::Trajectory),
        oracle: args.oracle.unwrap_or(false),
    };
    let params = LangevinParams { burn_in: s.burn_in, stride: s.stride, x0: s.x0, ..LangevinParams::new(s.b, s.f).map_err(CliError::config)? };
    params.validate().map_err(CliError::config)?;
    let run = langevin::simulate_langevin(&params, s.steps, stream(seed)?).map_err(|e| CliError::model("langevin", e))?;

    let (b2, f2) = (s.b.second_moment(), s.f.second_moment());
    let stationary = langevin::stationary_second_moment(b2, f2).ok();
    match s.mode {
        LangevinMode::Trajectory if s.oracle => out.csv(
            "trajectory.csv",
            columns(&[
                ("t", "iteration index"),
                ("x", "state after iteration t"),
                ("m2_running", "mean of x^2 over post-burn-in iterations up to t"),
                ("m2_stationary", "<f^2>/(1-<b^2>); empty when <b^2> >= 1"),
            ]),
            run.trajectory.iter().zip(&run.second_moment_trace).map(|(&(t, x), &(_, m2))| vec![t.into(), x.into(), m2.into(), Cell::opt(stationary)]),
        )?,
        LangevinMode::Trajectory => out.csv(
            "trajectory.csv",
            columns(&[("t", "iteration index"), ("x", "state after iteration t")]),
            run.trajectory.iter().map(|&(t, x)| vec![t.into(), x.into()]),
        )?,
        LangevinMode::Sample => {
            out.csv("samples.csv", columns(&[("x", "recorded state, in iteration order")]), run.trajectory.iter().map(|&(_, x)| vec![x.into()]))?
        }
    }

    let m2 = run.final_second_moment();
    let (tail, tail_error) = match langevin::estimate_tail_beta(&run.samples) {
        Ok(fit) => (Some(fit), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let summary = Summary {
        b2,
        f2,
        recorded: run.trajectory.len(),
        m2_running: m2,
        m2_stationary: stationary,
        m2_relative_error: stationary.map(|v| (m2 - v).abs() / v),
        tail,
        tail_error,
    };
    out.json("summary.json", &summary)?;
    to_json(&s)
}
