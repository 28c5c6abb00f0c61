use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use tailsim_cli::config::{self, FileConfig};
use tailsim_cli::experiments::{AgingArgs, GraphArgs, IntermittencyArgs, LangevinArgs, QueueArgs, SandpileArgs};
use tailsim_cli::sweep::{self, SweepSpec};
use tailsim_cli::{run_experiment, CliError, ExperimentConfig};

/// Heavy-tail generating models: seeded experiments with CSV/JSON outputs.
///
/// Outputs go to --out, else the file's `out`, else $TAILSIM_OUT/<experiment>,
/// else ./tailsim-out/<experiment>.
#[derive(Debug, Parser)]
#[command(name = "tailsim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML file; its section for this experiment is overridden by flags
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Multiplicative-noise recursion x <- b x + f
    Langevin {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        args: LangevinArgs,
    },
    /// Random graphs: `graph dma` or `graph cameo`
    Graph {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        args: GraphArgs,
    },
    /// Laminar-phase length of the threshold model
    Intermittency {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        args: IntermittencyArgs,
    },
    /// Single-server queue with deadlines
    Queue {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        args: QueueArgs,
    },
    /// Stationary and transient age profiles
    Aging {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        args: AgingArgs,
    },
    /// Driven sandpile avalanches and finite-size scaling
    Sandpile {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        args: SandpileArgs,
    },
    /// Run the experiment named by a config file's `experiment` key
    Run {
        file: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fan (grid value, seed) cells out over a worker pool
    Sweep {
        /// Experiment name; defaults to the file's `experiment`
        experiment: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Seeds as A..B (half-open) or a comma list
        #[arg(long)]
        seeds: Option<String>,
        /// Swept key and values, `key=v1;v2;...`; repeatable
        #[arg(long = "grid")]
        grid: Vec<String>,
        /// Fixed section value, `key=value`; repeatable
        #[arg(long = "set")]
        set: Vec<String>,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Stack one output file across the cells of a sweep
    Collect {
        /// Sweep root holding sweep.json
        root: PathBuf,
        /// Output name inside each cell, e.g. metrics.json or pmf.csv
        #[arg(long)]
        file: String,
        /// Merged CSV [default: ROOT/collected_<file stem>.csv]
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn experiment<T: Serialize>(name: &str, common: Common, args: &T) -> Result<(), CliError> {
    let flags = config::to_table(args)?;
    let cfg = ExperimentConfig::resolve(name, common.config.as_deref(), flags, common.seed, common.out)?;
    report(&cfg)
}

fn report(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let manifest = run_experiment(cfg)?;
    println!("{}: {} files in {} ({:.2} s)", manifest.experiment, manifest.outputs.len() + 1, cfg.out.display(), manifest.wall_clock_seconds);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run_sweep(
    experiment: Option<String>,
    config: Option<PathBuf>,
    seeds: Option<String>,
    grid: Vec<String>,
    set: Vec<String>,
    jobs: Option<usize>,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    let file = config.as_deref().map(FileConfig::load).transpose()?.unwrap_or_default();
    let name =
        experiment.or_else(|| file.experiment.clone()).ok_or_else(|| CliError::config("sweep needs an experiment name (argument or file `experiment`)"))?;
    let (file_seeds, file_jobs, file_grid) = match &file.sweep {
        Some(t) => sweep::parse_sweep_table(t)?,
        None => (None, None, Vec::new()),
    };
    let mut base = file.sections.get(&name).cloned().unwrap_or_default();
    for item in &set {
        let (k, v) = item.split_once('=').ok_or_else(|| CliError::config(format!("`set`: expected key=value, got `{item}`")))?;
        base.insert(k.trim().to_string(), config::parse_value(v.trim()));
    }
    let mut grid_keys = file_grid;
    for g in &grid {
        let (k, v) = sweep::parse_grid_flag(g)?;
        grid_keys.retain(|(key, _)| *key != k);
        grid_keys.push((k, v));
    }
    let seeds = match seeds {
        Some(s) => sweep::parse_seeds(&s)?,
        None => file_seeds.or_else(|| file.seed.map(|s| vec![s])).ok_or_else(|| CliError::config("sweep needs `seeds`"))?,
    };
    let out = out.or(file.out).unwrap_or_else(|| config::default_out_root().join(format!("{name}-sweep")));
    let spec = SweepSpec { experiment: name, base, grid: grid_keys, seeds, out, jobs: jobs.or(file_jobs) };
    let report = sweep::sweep(&spec)?;
    println!("sweep: {} cells, {} failed, report in {}", report.cells.len(), report.failures(), spec.out.join(sweep::SWEEP_FILE).display());
    for c in report.cells.iter().filter(|c| !c.ok) {
        eprintln!("cell {}: {}", c.index, c.error.as_deref().unwrap_or("failed"));
    }
    if report.failures() > 0 {
        return Err(CliError::Model { module: "sweep", message: format!("{} of {} cells failed", report.failures(), report.cells.len()) });
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Langevin { common, args } => experiment("langevin", common, &args),
        Command::Graph { common, args } => experiment("graph", common, &args),
        Command::Intermittency { common, args } => experiment("intermittency", common, &args),
        Command::Queue { common, args } => experiment("queue", common, &args),
        Command::Aging { common, args } => experiment("aging", common, &args),
        Command::Sandpile { common, args } => experiment("sandpile", common, &args),
        Command::Run { file, seed, out } => report(&ExperimentConfig::from_file(&file, seed, out)?),
        Command::Sweep { experiment, config, seeds, grid, set, jobs, out } => run_sweep(experiment, config, seeds, grid, set, jobs, out),
        Command::Collect { root, file, out } => {
            let stem = file.rsplit_once('.').map_or(file.as_str(), |(s, _)| s);
            let dest = out.unwrap_or_else(|| root.join(format!("collected_{stem}.csv")));
            let rows = sweep::collect(&root, &file, &dest)?;
            println!("collect: {rows} rows in {}", dest.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("tailsim: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
