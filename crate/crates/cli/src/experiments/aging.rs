use clap::Args;
use serde::{Deserialize, Serialize};
use tailsim_core::tail::LineFit;
use tailsim_models::queueing::aging::relative_l1;
use tailsim_models::queueing::{self, AgeRate, AgingConfig, Regime};

use super::to_json;
use crate::output::{columns, Cell, OutputSet};
use crate::CliError;

/// Population density over task age with inflow below the cutoff `T`.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct AgingArgs {
    /// Aging rate p(a) [default: power:c=1,q=1]
    #[arg(long)]
    pub p: Option<String>,
    /// Service rate mu(a) [default: 2.5]
    #[arg(long)]
    pub mu: Option<String>,
    /// Inflow rate per unit age below T [default: 1]
    #[arg(long)]
    pub inflow: Option<f64>,
    /// Inflow cutoff age [default: 1]
    #[arg(long = "T")]
    #[serde(rename = "T")]
    pub cutoff: Option<f64>,
    /// First grid node [default: T/10]
    #[arg(long)]
    pub a_min: Option<f64>,
    /// Last grid node [default: 10 T]
    #[arg(long)]
    pub a_max: Option<f64>,
    /// Grid spacing [default: T/500]
    #[arg(long)]
    pub da: Option<f64>,
    /// PDE time step [default: 0.9 of the stability limit]
    #[arg(long)]
    pub dt: Option<f64>,
    /// PDE end time [default: 50 T]
    #[arg(long)]
    pub t_end: Option<f64>,
    /// Run the PDE to fill M_pde [default: true]
    #[arg(long, num_args = 0..=1, require_equals = true, default_missing_value = "true")]
    pub pde: Option<bool>,
}

#[derive(Debug, Serialize)]
struct Settings {
    p: AgeRate,
    mu: AgeRate,
    inflow: f64,
    cutoff: f64,
    a_min: f64,
    a_max: f64,
    da: f64,
    dt: Option<f64>,
    t_end: Option<f64>,
}

#[derive(Debug, Serialize)]
struct Summary {
    regime: Regime,
    c: f64,
    psi: f64,
    balance_residual: f64,
    /// Log-log fit of the stationary profile over `[a_max/12, a_max/1.2]`,
    /// power-tail regime only.
    tail_fit: Option<LineFit>,
    predicted_tail_slope: Option<f64>,
    pde_relative_l1: Option<f64>,
}

fn rate(key: &str, value: Option<&str>, default: &str) -> Result<AgeRate, CliError> {
    value.unwrap_or(default).parse().map_err(|e| CliError::config(format!("`{key}`: {e}")))
}

pub fn run(args: &AgingArgs, out: &mut OutputSet) -> Result<serde_json::Value, CliError> {
    let cutoff = args.cutoff.unwrap_or(1.0);
    let p = rate("p", args.p.as_deref(), "power:c=1,q=1")?;
    let mu = rate("mu", args.mu.as_deref(), "2.5")?;
    let config = AgingConfig {
        p,
        mu,
        inflow_rate: args.inflow.unwrap_or(1.0),
        cutoff,
        a_min: args.a_min.unwrap_or(cutoff / 10.0),
        a_max: args.a_max.unwrap_or(10.0 * cutoff),
        da: args.da.unwrap_or(cutoff / 500.0),
    };
    config.validate().map_err(CliError::config)?;
    let module_err = |e: queueing::QueueError| CliError::model("aging", e);
    let profile = queueing::aging_stationary(&config).map_err(module_err)?;

    let grid = config.grid();
    let run_pde = args.pde.unwrap_or(true);
    let (dt, t_end) = if run_pde {
        let p_max = grid.iter().map(|&a| p.eval(a)).fold(0.0, f64::max);
        let mu_max = grid.iter().map(|&a| mu.eval(a)).fold(0.0, f64::max);
        let limit = (config.da / p_max).min(if mu_max > 0.0 { 1.0 / mu_max } else { f64::INFINITY });
        (Some(args.dt.unwrap_or(0.9 * limit)), Some(args.t_end.unwrap_or(50.0 * cutoff)))
    } else {
        (None, None)
    };
    let pde = match (dt, t_end) {
        (Some(dt), Some(t_end)) => {
            let traj = queueing::aging_evolve(&config, |_| 0.0, profile.c, dt, t_end, usize::MAX).map_err(|e| match e {
                queueing::QueueError::Config(m) => CliError::config(m),
                other => module_err(other),
            })?;
            Some(traj.last().to_vec())
        }
        _ => None,
    };

    out.csv(
        "aging.csv",
        columns(&[
            ("a", "age"),
            ("M_stationary", "stationary density from quadrature"),
            ("M_pde", "upwind PDE solution at t_end from an empty start; empty without the PDE"),
        ]),
        grid.iter().enumerate().map(|(i, &a)| vec![a.into(), profile.m[i].into(), Cell::opt(pde.as_ref().map(|m| m[i]))]),
    )?;

    let power = matches!(profile.regime, Regime::PowerTail { .. });
    let summary = Summary {
        regime: profile.regime,
        c: profile.c,
        psi: profile.psi,
        balance_residual: profile.balance_residual,
        tail_fit: if power { profile.tail_fit(config.a_max / 12.0, config.a_max / 1.2).ok() } else { None },
        predicted_tail_slope: match profile.regime {
            Regime::PowerTail { k } => Some(-k),
            _ => None,
        },
        pde_relative_l1: pde.as_ref().map(|m| relative_l1(m, &profile.m)),
    };
    out.json("summary.json", &summary)?;
    let s = Settings { p, mu, inflow: config.inflow_rate, cutoff, a_min: config.a_min, a_max: config.a_max, da: config.da, dt, t_end };
    to_json(&s)
}
