//! Configuration files, flag overlays and output-directory defaults.
//!
//! A file holds top-level `experiment`, `seed` and `out` keys plus one
//! section per experiment:
//!
//! ```toml
//! experiment = "queue"
//! seed = 7
//!
//! [queue]
//! rho = 0.95
//! deadline = "exp:rate=0.1"
//! snapshot-q = "15:23"
//! ```
//!
//! Section keys are the long flag names of the matching subcommand.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use toml::{Table, Value};

use crate::experiments::{AgingArgs, GraphArgs, IntermittencyArgs, LangevinArgs, QueueArgs, SandpileArgs};
use crate::CliError;

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "TAILSIM_OUT";
const DEFAULT_OUT_ROOT: &str = "tailsim-out";

pub const EXPERIMENTS: [&str; 6] = ["langevin", "graph", "intermittency", "queue", "aging", "sandpile"];

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum ExperimentParams {
    Langevin(LangevinArgs),
    Graph(GraphArgs),
    Intermittency(IntermittencyArgs),
    Queue(QueueArgs),
    Aging(AgingArgs),
    Sandpile(SandpileArgs),
}

impl ExperimentParams {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Langevin(_) => "langevin",
            Self::Graph(_) => "graph",
            Self::Intermittency(_) => "intermittency",
            Self::Queue(_) => "queue",
            Self::Aging(_) => "aging",
            Self::Sandpile(_) => "sandpile",
        }
    }

    pub fn from_table(name: &str, table: Table) -> Result<Self, CliError> {
        fn section<T: DeserializeOwned>(name: &str, table: Table) -> Result<T, CliError> {
            Value::Table(table).try_into().map_err(|e| CliError::config(format!("[{name}] {}", one_line(&e.to_string()))))
        }
        Ok(match name {
            "langevin" => Self::Langevin(section(name, table)?),
            "graph" => Self::Graph(section(name, table)?),
            "intermittency" => Self::Intermittency(section(name, table)?),
            "queue" => Self::Queue(section(name, table)?),
            "aging" => Self::Aging(section(name, table)?),
            "sandpile" => Self::Sandpile(section(name, table)?),
            other => return Err(CliError::config(format!("unknown experiment `{other}` (one of {})", EXPERIMENTS.join(", ")))),
        })
    }

    pub fn to_table(&self) -> Result<Table, CliError> {
        to_table(self)
    }

    /// Whether the run draws random numbers and therefore needs a seed.
    pub fn is_stochastic(&self) -> bool {
        match self {
            Self::Aging(_) => false,
            Self::Intermittency(a) => !a.oracle_only.unwrap_or(false),
            _ => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub params: ExperimentParams,
    pub seed: Option<u64>,
    pub out: PathBuf,
}

impl ExperimentConfig {
    /// Builds a config for experiment `name` from an optional file and the
    /// flag values, which win key by key.
    pub fn resolve(name: &str, file: Option<&Path>, flags: Table, seed: Option<u64>, out: Option<PathBuf>) -> Result<Self, CliError> {
        let file = file.map(FileConfig::load).transpose()?.unwrap_or_default();
        if let Some(named) = &file.experiment {
            if named != name {
                return Err(CliError::config(format!("file is for experiment `{named}`, not `{name}`")));
            }
        }
        let mut section = file.sections.get(name).cloned().unwrap_or_default();
        overlay(&mut section, flags);
        Self::from_parts(name, section, seed.or(file.seed), out.or(file.out))
    }

    /// Config for a file that names its own experiment.
    pub fn from_file(path: &Path, seed: Option<u64>, out: Option<PathBuf>) -> Result<Self, CliError> {
        let file = FileConfig::load(path)?;
        let name = file.experiment.clone().ok_or_else(|| CliError::config(format!("{}: missing top-level key `experiment`", path.display())))?;
        let section = file.sections.get(&name).cloned().unwrap_or_default();
        Self::from_parts(&name, section, seed.or(file.seed), out.or(file.out))
    }

    pub fn from_parts(name: &str, section: Table, seed: Option<u64>, out: Option<PathBuf>) -> Result<Self, CliError> {
        let params = ExperimentParams::from_table(name, section)?;
        if params.is_stochastic() && seed.is_none() {
            return Err(CliError::config(format!("`seed` is required for experiment `{name}` (--seed or `seed = ...`)")));
        }
        let out = out.unwrap_or_else(|| default_out_root().join(name));
        Ok(Self { params, seed, out })
    }

    /// The config as a file that `tailsim run` accepts. The output
    /// directory is left out so the echo does not depend on where it lives.
    pub fn to_toml(&self) -> Result<String, CliError> {
        let mut top = Table::new();
        top.insert("experiment".into(), Value::String(self.params.name().into()));
        if let Some(seed) = self.seed {
            top.insert("seed".into(), seed_value(seed)?);
        }
        top.insert(self.params.name().into(), Value::Table(self.params.to_table()?));
        toml::to_string(&top).map_err(|e| CliError::config(e.to_string()))
    }
}

fn seed_value(seed: u64) -> Result<Value, CliError> {
    i64::try_from(seed).map(Value::Integer).map_err(|_| CliError::config(format!("seed {seed} does not fit a TOML integer (max {})", i64::MAX)))
}

/// Root for outputs when no `out` is given: `$TAILSIM_OUT`, else `./tailsim-out`.
pub fn default_out_root() -> PathBuf {
    std::env::var_os(OUT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_ROOT))
}

/// Parsed top level of a config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FileConfig {
    pub experiment: Option<String>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub sections: BTreeMap<String, Table>,
    /// `[sweep]` block, read by the sweep subcommand only.
    pub sweep: Option<Table>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let table: Table = text.parse().map_err(|e: toml::de::Error| CliError::config(one_line(&e.to_string())))?;
        let mut cfg = Self::default();
        for (key, value) in table {
            match (key.as_str(), value) {
                ("experiment", Value::String(s)) => cfg.experiment = Some(s),
                ("seed", Value::Integer(i)) if i >= 0 => cfg.seed = Some(i as u64),
                ("out", Value::String(s)) => cfg.out = Some(PathBuf::from(s)),
                ("sweep", Value::Table(t)) => cfg.sweep = Some(t),
                (name, Value::Table(t)) if EXPERIMENTS.contains(&name) => {
                    cfg.sections.insert(key, t);
                }
                ("experiment" | "out", v) => return Err(CliError::config(format!("`{key}` must be a string, got {v}"))),
                ("seed", v) => return Err(CliError::config(format!("`seed` must be a nonnegative integer, got {v}"))),
                _ => return Err(CliError::config(format!("unknown key `{key}`"))),
            }
        }
        Ok(cfg)
    }
}

/// Serializes flag structs; unset (`None`) fields are omitted.
pub fn to_table<T: Serialize>(value: &T) -> Result<Table, CliError> {
    Table::try_from(value).map_err(|e| CliError::config(e.to_string()))
}

/// Copies every key of `top` into `base`, replacing existing values.
pub fn overlay(base: &mut Table, top: Table) {
    for (k, v) in top {
        base.insert(k, v);
    }
}

/// Parses `text` as a TOML value, falling back to a bare string so that
/// `policy=edf` works as well as `policy="edf"`.
pub fn parse_value(text: &str) -> Value {
    let doc = format!("v = {text}");
    match doc.parse::<Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| Value::String(text.into())),
        Err(_) => Value::String(text.into()),
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_top_level_key() {
        let err = FileConfig::parse("experiment = \"queue\"\nsed = 3\n").unwrap_err();
        assert!(err.to_string().contains("`sed`"), "{err}");
    }

    #[test]
    fn bare_values() {
        assert_eq!(parse_value("0.5"), Value::Float(0.5));
        assert_eq!(parse_value("12"), Value::Integer(12));
        assert_eq!(parse_value("edf"), Value::String("edf".into()));
        assert_eq!(parse_value("exp:rate=1"), Value::String("exp:rate=1".into()));
    }
}
