use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use tailsim_core::tail::{fit_tail_loglog, LineFit, TailFit};
use tailsim_core::{Distribution, EmpiricalDistribution};
use tailsim_models::graphgen::{self, CameoConfig, DmaConfig, GeneratedGraph};

use super::{dist, parse_count, stream, to_json};
use crate::output::{columns, OutputSet};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GraphKind {
    /// Group-preference attachment with power-law group sizes.
    Dma,
    /// Trait-driven attachment with random out-degree.
    Cameo,
}

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct GraphArgs {
    #[arg(value_enum)]
    pub kind: Option<GraphKind>,
    /// Vertices [default: 100000]
    #[arg(long, value_parser = parse_count)]
    #[serde(default, deserialize_with = "super::count")]
    pub n: Option<u64>,
    /// Preference exponent [default: 0.5]
    #[arg(long)]
    pub alpha: Option<f64>,
    /// DMA group-size exponent [default: 3]
    #[arg(long)]
    pub gamma: Option<f64>,
    /// DMA: smallest group entering the in-degree regression [default: 10]
    #[arg(long, value_parser = parse_count)]
    #[serde(default, deserialize_with = "super::count")]
    pub min_group: Option<u64>,
    /// Cameo trait law [default: exp:rate=1]
    #[arg(long = "trait")]
    #[serde(rename = "trait")]
    pub trait_law: Option<String>,
    /// Cameo out-degree law [default: point:x=3]
    #[arg(long)]
    pub out_degree: Option<String>,
    /// Cameo in-degree CCDF fit window start [default: 5]
    #[arg(long)]
    pub fit_lo: Option<f64>,
    /// Cameo in-degree CCDF fit window end [default: 50]
    #[arg(long)]
    pub fit_hi: Option<f64>,
    /// Report the predicted slope or exponent beside the fit
    #[arg(long, num_args = 0..=1, require_equals = true, default_missing_value = "true")]
    pub oracle: Option<bool>,
}

#[derive(Debug, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
enum Settings {
    Dma { n: usize, alpha: f64, gamma: f64, min_group: usize, oracle: bool },
    Cameo { n: usize, alpha: f64, trait_law: Distribution, out_degree: Distribution, fit_window: (f64, f64), oracle: bool },
}

#[derive(Debug, Serialize)]
struct Summary {
    vertices: usize,
    edges: usize,
    choices: u64,
    normalization: f64,
    /// DMA: log-log slope of mean in-degree against group index.
    group_slope: Option<LineFit>,
    /// Cameo: in-degree CCDF fit.
    in_degree_tail: Option<TailFit>,
    /// `-slope` of the in-degree CCDF fit.
    in_degree_index: Option<f64>,
    fit_error: Option<String>,
    /// Slope (DMA) or CCDF index (Cameo) predicted by the model.
    predicted: Option<f64>,
}

pub fn run(args: &GraphArgs, seed: Option<u64>, out: &mut OutputSet) -> Result<serde_json::Value, CliError> {
    let kind = args.kind.ok_or_else(|| CliError::config("`kind` is required (dma or cameo)"))?;
    let n = args.n.unwrap_or(100_000) as usize;
    let alpha = args.alpha.unwrap_or(0.5);
    let oracle = args.oracle.unwrap_or(false);
    let stream = stream(seed)?;
    let (settings, graph, summary) = match kind {
        GraphKind::Dma => {
            let gamma = args.gamma.unwrap_or(3.0);
            let min_group = args.min_group.unwrap_or(10) as usize;
            let config = DmaConfig::new(n, gamma, alpha).map_err(CliError::config)?;
            let g = graphgen::generate_dma_graph(&config, stream).map_err(|e| CliError::model("graph", e))?;
            let fit = graphgen::in_degree_vs_group(&g, min_group);
            let mut summary = summary_of(&g, oracle.then_some(alpha));
            match fit {
                Ok(f) => summary.group_slope = Some(f),
                Err(e) => summary.fit_error = Some(e.to_string()),
            }
            (Settings::Dma { n, alpha, gamma, min_group, oracle }, g, summary)
        }
        GraphKind::Cameo => {
            let config = CameoConfig {
                n,
                alpha,
                trait_law: dist("trait", args.trait_law.as_deref(), "exp:rate=1")?,
                out_degree: dist("out-degree", args.out_degree.as_deref(), "point:x=3")?,
            };
            config.validate().map_err(CliError::config)?;
            let window = (args.fit_lo.unwrap_or(5.0), args.fit_hi.unwrap_or(50.0));
            let g = graphgen::generate_cameo_graph(&config, stream).map_err(|e| CliError::model("graph", e))?;
            let mut summary = summary_of(&g, oracle.then_some(1.0 / alpha));
            let din = EmpiricalDistribution::new(g.d_in.iter().map(|&k| k as f64).collect()).map_err(|e| CliError::model("graph", e))?;
            match fit_tail_loglog(&din, window.0, window.1) {
                Ok(f) => {
                    summary.in_degree_index = Some(f.index());
                    summary.in_degree_tail = Some(f);
                }
                Err(e) => summary.fit_error = Some(e.to_string()),
            }
            let s = Settings::Cameo { n, alpha, trait_law: config.trait_law, out_degree: config.out_degree, fit_window: window, oracle };
            (s, g, summary)
        }
    };

    out.csv("edges.csv", columns(&[("src", "smaller endpoint"), ("dst", "larger endpoint")]), graph.edges.iter().map(|&(u, v)| vec![u.into(), v.into()]))?;
    let label_doc = match kind {
        GraphKind::Dma => "group index",
        GraphKind::Cameo => "trait value omega",
    };
    out.csv(
        "degrees.csv",
        columns(&[
            ("vertex", "vertex id"),
            ("omega_or_group", label_doc),
            ("dout", "choices made by the vertex"),
            ("din", "times the vertex was chosen"),
            ("d", "distinct neighbours"),
        ]),
        (0..graph.vertex_count()).map(|x| vec![x.into(), graph.label[x].into(), graph.d_out[x].into(), graph.d_in[x].into(), graph.d[x].into()]),
    )?;
    out.json("summary.json", &summary)?;
    to_json(&settings)
}

fn summary_of(g: &GeneratedGraph, predicted: Option<f64>) -> Summary {
    Summary {
        vertices: g.vertex_count(),
        edges: g.edges.len(),
        choices: g.choices,
        normalization: g.normalization,
        group_slope: None,
        in_degree_tail: None,
        in_degree_index: None,
        fit_error: None,
        predicted,
    }
}
