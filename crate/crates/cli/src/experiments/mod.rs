//! One module per experiment. Each defines the flag/section struct and a
//! `run` that writes outputs and returns the resolved settings.

use serde::Serialize;
use tailsim_core::{Distribution, Stream};

use crate::config::{ExperimentConfig, ExperimentParams};
use crate::output::{json_bytes, Clock, OutputSet, RunManifest, MANIFEST};
use crate::CliError;

pub mod aging;
pub mod graph;
pub mod intermittency;
pub mod langevin;
pub mod queue;
pub mod sandpile;

pub use aging::AgingArgs;
pub use graph::{GraphArgs, GraphKind};
pub use intermittency::IntermittencyArgs;
pub use langevin::{LangevinArgs, LangevinMode};
pub use queue::QueueArgs;
pub use sandpile::{SandpileArgs, SideList};

pub fn run(config: &ExperimentConfig) -> Result<RunManifest, CliError> {
    run_cell(config, None)
}

/// As [`run`], tagging the manifest with sweep-cell parameters.
pub fn run_cell(config: &ExperimentConfig, cell: Option<serde_json::Map<String, serde_json::Value>>) -> Result<RunManifest, CliError> {
    let clock = Clock::start();
    let mut out = OutputSet::create(&config.out)?;
    let seed = config.seed;
    let resolved = match &config.params {
        ExperimentParams::Langevin(a) => langevin::run(a, seed, &mut out)?,
        ExperimentParams::Graph(a) => graph::run(a, seed, &mut out)?,
        ExperimentParams::Intermittency(a) => intermittency::run(a, seed, &mut out)?,
        ExperimentParams::Queue(a) => queue::run(a, seed, &mut out)?,
        ExperimentParams::Aging(a) => aging::run(a, &mut out)?,
        ExperimentParams::Sandpile(a) => sandpile::run(a, seed, &mut out)?,
    };
    out.text("config.toml", config.to_toml()?)?;
    let manifest = RunManifest {
        tool: "tailsim",
        version: env!("CARGO_PKG_VERSION"),
        experiment: config.params.name(),
        seed,
        config: resolved,
        started_unix_seconds: clock.started_unix_seconds(),
        wall_clock_seconds: clock.elapsed_seconds(),
        outputs: out.entries().to_vec(),
        cell,
    };
    let path = config.out.join(MANIFEST);
    std::fs::write(&path, json_bytes(&manifest)?).map_err(|e| CliError::io(&path, e))?;
    Ok(manifest)
}

pub(crate) fn dist(key: &str, value: Option<&str>, default: &str) -> Result<Distribution, CliError> {
    value.unwrap_or(default).parse().map_err(|e| CliError::config(format!("`{key}`: {e}")))
}

pub(crate) fn stream(seed: Option<u64>) -> Result<Stream, CliError> {
    seed.map(Stream::new).ok_or_else(|| CliError::config("`seed` is required"))
}

pub(crate) fn to_json<T: Serialize>(value: &T) -> Result<serde_json::Value, CliError> {
    serde_json::to_value(value).map_err(|e| CliError::model("output", e))
}

/// Counts as plain integers or in exponent form (`1e6`).
pub fn parse_count(s: &str) -> Result<u64, String> {
    let s = s.trim().replace('_', "");
    if let Ok(n) = s.parse::<u64>() {
        return Ok(n);
    }
    match s.parse::<f64>() {
        Ok(x) if x >= 0.0 && x.fract() == 0.0 && x < 2f64.powi(64) => Ok(x as u64),
        _ => Err(format!("`{s}` is not a nonnegative integer")),
    }
}

/// Serde form of [`parse_count`]: TOML files may write `1e6` or `"1_000_000"`.
pub fn count<'de, D: serde::Deserializer<'de>>(de: D) -> Result<Option<u64>, D::Error> {
    #[derive(serde::Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Int(u64),
        Float(f64),
        Text(String),
    }
    let text = match <Option<Raw> as serde::Deserialize>::deserialize(de)? {
        None => return Ok(None),
        Some(Raw::Int(n)) => return Ok(Some(n)),
        Some(Raw::Float(x)) => x.to_string(),
        Some(Raw::Text(s)) => s,
    };
    parse_count(&text).map(Some).map_err(serde::de::Error::custom)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts() {
        assert_eq!(parse_count("1e6"), Ok(1_000_000));
        assert_eq!(parse_count("10_000"), Ok(10_000));
        assert!(parse_count("1.5").is_err());
        assert!(parse_count("-3").is_err());
    }
}
