use clap::Args;
use serde::{Deserialize, Serialize};
use tailsim_core::{Distribution, EmpiricalDistribution};
use tailsim_models::queueing::ltp::SnapshotComparison;
use tailsim_models::queueing::{self, LeadTimeCdf, Policy, QueueConfig, QueueMetrics, RunOptions};

use super::{dist, stream, to_json};
use crate::output::{columns, Cell, OutputSet};
use crate::CliError;

const LTP_GRID: usize = 201;

/// Single-server queue with deadlines.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct QueueArgs {
    /// Interarrival law; exclusive with --rho
    #[arg(long)]
    pub arrival: Option<String>,
    /// Load; sets exponential interarrivals with rate rho / mean service
    #[arg(long)]
    pub rho: Option<f64>,
    /// Service-time law [default: exp:rate=1]
    #[arg(long)]
    pub service: Option<String>,
    /// Relative-deadline law [default: exp:rate=0.1]
    #[arg(long)]
    pub deadline: Option<String>,
    /// edf, fcfs or ros [default: edf]
    #[arg(long)]
    pub policy: Option<String>,
    /// Simulated time [default: 100000]
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Statistics start here [default: 0]
    #[arg(long)]
    pub warmup: Option<f64>,
    /// Lead-time snapshots are pooled over queue lengths LO:HI
    #[arg(long)]
    pub snapshot_q: Option<String>,
    /// Rate of the Poisson inspection clock [default: 0.05 with --snapshot-q]
    #[arg(long)]
    pub inspection_rate: Option<f64>,
    /// Add M/M/1 mean waits and queue lengths when both laws are exponential
    #[arg(long, num_args = 0..=1, require_equals = true, default_missing_value = "true")]
    pub oracle: Option<bool>,
}

#[derive(Debug, Serialize)]
struct Settings {
    interarrival: Distribution,
    service: Distribution,
    deadline: Distribution,
    policy: Policy,
    lambda: f64,
    rho: f64,
    horizon: f64,
    warmup: f64,
    snapshot_q: Option<(usize, usize)>,
    inspection_rate: f64,
    oracle: bool,
}

#[derive(Debug, Serialize)]
struct Metrics {
    stable: bool,
    metrics: QueueMetrics,
    /// Relative gap between `<Q>` and `lambda <W>`.
    little_error: f64,
    ltp: Option<SnapshotComparison>,
    mm1: Option<Mm1>,
}

/// Waiting-room means of M/M/1, shared by every work-conserving policy.
#[derive(Debug, Serialize)]
struct Mm1 {
    mean_w: f64,
    mean_q: f64,
}

fn parse_window(text: &str) -> Result<(usize, usize), CliError> {
    let bad = || CliError::config(format!("`snapshot-q`: expected LO:HI with integers LO <= HI, got `{text}`"));
    let (lo, hi) = text.split_once(':').ok_or_else(bad)?;
    let (lo, hi): (usize, usize) = (lo.trim().parse().map_err(|_| bad())?, hi.trim().parse().map_err(|_| bad())?);
    if lo > hi {
        return Err(bad());
    }
    Ok((lo, hi))
}

pub fn run(args: &QueueArgs, seed: Option<u64>, out: &mut OutputSet) -> Result<serde_json::Value, CliError> {
    let service = dist("service", args.service.as_deref(), "exp:rate=1")?;
    let deadline = dist("deadline", args.deadline.as_deref(), "exp:rate=0.1")?;
    let policy: Policy = args.policy.as_deref().unwrap_or("edf").parse().map_err(|e| CliError::config(format!("`policy`: {e}")))?;
    let interarrival = match (&args.arrival, args.rho) {
        (Some(_), Some(_)) => return Err(CliError::config("`arrival` and `rho` are exclusive")),
        (Some(a), None) => dist("arrival", Some(a), "")?,
        (None, Some(rho)) => Distribution::exponential(rho / service.mean()).map_err(|e| CliError::config(format!("`rho`: {e}")))?,
        (None, None) => return Err(CliError::config("one of `arrival` or `rho` is required")),
    };
    let config = QueueConfig::new(interarrival, service, deadline, policy).map_err(CliError::config)?;
    let snapshot_q = args.snapshot_q.as_deref().map(parse_window).transpose()?;
    let s = Settings {
        interarrival,
        service,
        deadline,
        policy,
        lambda: config.lambda(),
        rho: config.rho(),
        horizon: args.horizon.unwrap_or(1e5),
        warmup: args.warmup.unwrap_or(0.0),
        snapshot_q,
        inspection_rate: args.inspection_rate.unwrap_or(if snapshot_q.is_some() { 0.05 } else { 0.0 }),
        oracle: args.oracle.unwrap_or(false),
    };
    let options = RunOptions { warmup: s.warmup, inspection_rate: s.inspection_rate, q_window: s.snapshot_q, record_tasks: true, ..RunOptions::new(s.horizon) };
    let module_err = |e: queueing::QueueError| CliError::model("queue", e);
    let run = queueing::run_des(&config, &options, stream(seed)?).map_err(module_err)?;

    out.csv(
        "tasks.csv",
        columns(&[
            ("id", "task id in arrival order"),
            ("arrival", "arrival time"),
            ("deadline", "relative deadline"),
            ("service", "service requirement"),
            ("start", "first service start"),
            ("finish", "departure time"),
            ("wait", "time spent waiting, excluding service"),
            ("late", "1 if finish exceeds arrival + deadline"),
        ]),
        run.tasks
            .iter()
            .map(|t| vec![t.id.into(), t.arrival.into(), t.deadline.into(), t.service.into(), t.start.into(), t.finish.into(), t.wait.into(), t.late.into()]),
    )?;

    let ltp = match s.snapshot_q {
        Some(window) => {
            let cmp = queueing::snapshot_compare(&run.snapshots, &deadline, s.lambda, window, policy).map_err(module_err)?;
            write_ltp(out, &cmp, &deadline, s.lambda, policy)?;
            Some(cmp)
        }
        None => None,
    };

    let exponential = |d: &Distribution| matches!(d, Distribution::Exponential { .. });
    let mm1 = (s.oracle && exponential(&interarrival) && exponential(&service) && s.rho < 1.0).then(|| {
        let mu = config.mu();
        Mm1 { mean_w: s.rho / (mu * (1.0 - s.rho)), mean_q: s.rho * s.rho / (1.0 - s.rho) }
    });
    let metrics = Metrics { stable: run.stable, metrics: run.metrics, little_error: run.metrics.little_error(), ltp, mm1 };
    out.json("metrics.json", &metrics)?;
    to_json(&s)
}

fn write_ltp(out: &mut OutputSet, cmp: &SnapshotComparison, deadline: &Distribution, lambda: f64, policy: Policy) -> Result<(), CliError> {
    let emp = EmpiricalDistribution::new(cmp.pooled.clone()).map_err(|e| CliError::model("queue", e))?;
    let module_err = |e: queueing::QueueError| CliError::model("queue", e);
    let analytic: Box<dyn LeadTimeCdf> = match policy {
        Policy::Edf => Box::new(queueing::analytic_ltp_edf(deadline, lambda, cmp.q_center).map_err(module_err)?),
        Policy::Fcfs | Policy::Ros => Box::new(queueing::analytic_ltp_fcfs(deadline, lambda, cmp.q_center).map_err(module_err)?),
    };
    let (lo, hi) = (emp.min(), emp.max());
    out.csv(
        "ltp.csv",
        columns(&[
            ("x", "lead time"),
            ("F_emp", "fraction of pooled snapshot lead times below x"),
            ("F_analytic", "lead-time profile CDF at the window's central Q"),
        ]),
        (0..LTP_GRID).map(|k| {
            let x = lo + (hi - lo) * k as f64 / (LTP_GRID - 1) as f64;
            vec![Cell::Float(x), emp.cdf(x).into(), analytic.cdf(x).into()]
        }),
    )
}
