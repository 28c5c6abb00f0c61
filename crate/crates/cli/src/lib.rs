//! Experiment runner for the `tailsim` binary.
//!
//! Every experiment reads one parameter block, either from the command line
//! or from a TOML file section named after the experiment; flags override
//! file values key by key. A run writes its CSV/JSON outputs plus a
//! `manifest.json` holding the resolved configuration and a SHA-256 per
//! output file.
//!
//! Distribution-valued keys (`--b`, `--F`, `--service`, ...) take the
//! grammar `kind[:key=value,...]`:
//!
//! | kind        | keys (defaults)          | law                                  |
//! |-------------|--------------------------|--------------------------------------|
//! | `uniform`   | `lo=0`, `hi=1`           | uniform on `[lo, hi]`                |
//! | `powdens`   | `alpha`                  | density `(1+alpha) u^alpha` on [0,1] |
//! | `betalike`  | `alpha`, `beta`          | density ∝ `u^alpha (1-u)^beta`       |
//! | `exp`       | `rate=1`                 | exponential                          |
//! | `pareto`    | `B=1`, `omega`           | `P{X > x} = (B/x)^(omega-1)`, x ≥ B  |
//! | `point`     | `x`                      | unit mass at `x`                     |
//! | `twopoint`  | `a`, `b`, `p=0.5`        | `a` with probability `p`, else `b`   |
//! | `lognormal` | `mu=0`, `sigma`          | `exp(N(mu, sigma²))`                 |
//! | `normal`    | `mean=0`, `sd=1`         | Gaussian                             |
//!
//! Age-dependent rates of the aging experiment (`--p`, `--mu`) take
//! `const:c=K`, `power:c=K,q=E` (meaning `K a^E`) or a bare number.

use std::path::PathBuf;

use thiserror::Error;

pub mod config;
pub mod experiments;
pub mod output;
pub mod sweep;

pub use config::{ExperimentConfig, ExperimentParams, OUT_ENV};
pub use output::{OutputSet, RunManifest};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{module}: {message}")]
    Model { module: &'static str, message: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn config(message: impl std::fmt::Display) -> Self {
        Self::Config(message.to_string())
    }

    pub fn model(module: &'static str, err: impl std::fmt::Display) -> Self {
        Self::Model { module, message: err.to_string() }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }

    /// 2 for configuration problems, 3 for everything that fails at run time.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Model { .. } | Self::Io { .. } => 3,
        }
    }
}

/// Runs the experiment and writes its outputs and manifest into `config.out`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunManifest, CliError> {
    experiments::run(config)
}
