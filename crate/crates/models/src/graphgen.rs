//! Static random graphs with activity-weighted and rarity-weighted choices.
//!
//! In the degree-mass-action model vertices fall into activity groups
//! `C_1, C_2, ...` with `|C_i| ≈ c₁ n / i^γ`; a vertex of group `i` makes `i`
//! choices and each choice lands on a vertex of group `j` with probability
//! proportional to `j^α`.
//!
//! In the Cameo model each vertex carries a trait `ω ~ φ`, makes a random
//! number of choices, and each choice lands on `y` with probability
//! proportional to `φ(ω(y))^{-α}`: rare traits attract.

use std::collections::HashSet;

use rand::Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution as _;
use serde::Serialize;
use tailsim_core::tail::{self, LineFit, TailError, TailFit};
use tailsim_core::{Distribution, EmpiricalDistribution, Stream};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("invalid graph configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Tail(#[from] TailError),
}

/// Riemann zeta for `s > 1`, by direct summation with an Euler–Maclaurin tail.
pub fn zeta(s: f64) -> f64 {
    const K: usize = 1000;
    let head: f64 = (1..K).map(|k| (k as f64).powf(-s)).sum();
    let k = K as f64;
    head + k.powf(1.0 - s) / (s - 1.0) + 0.5 * k.powf(-s) + s * k.powf(-s - 1.0) / 12.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DmaConfig {
    pub n: usize,
    pub gamma: f64,
    pub alpha: f64,
    /// Group-size normalization; `1/ζ(γ)` makes the quotas sum to `n`.
    pub c1: f64,
}

impl DmaConfig {
    pub fn new(n: usize, gamma: f64, alpha: f64) -> Result<Self, GraphError> {
        let c = Self { n, gamma, alpha, c1: 1.0 / zeta(gamma) };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), GraphError> {
        if !(self.gamma > 2.0) {
            return Err(GraphError::Config(format!("gamma must exceed 2, got {}", self.gamma)));
        }
        if !(self.alpha < self.gamma - 1.0) {
            return Err(GraphError::Config(format!("alpha must be below gamma - 1, got {}", self.alpha)));
        }
        if !(self.c1 > 0.0) || self.n == 0 {
            return Err(GraphError::Config("need n > 0 and c1 > 0".into()));
        }
        if self.c1 * (self.n as f64) < 0.5 {
            return Err(GraphError::Config(format!("group C_1 would be empty (c1·n = {})", self.c1 * self.n as f64)));
        }
        Ok(())
    }

    /// Sizes `|C_1|, |C_2|, ...` summing to `n` exactly.
    ///
    /// Groups run while the quota `c₁ n / i^γ` is at least one half; quotas
    /// are rescaled to total `n` and rounded by largest remainder.
    pub fn group_sizes(&self) -> Result<Vec<usize>, GraphError> {
        self.validate()?;
        let nf = self.n as f64;
        let quotas: Vec<f64> = (1..).map(|i| self.c1 * nf / (i as f64).powf(self.gamma)).take_while(|&q| q >= 0.5).collect();
        let total: f64 = quotas.iter().sum();
        let scaled: Vec<f64> = quotas.iter().map(|q| q * nf / total).collect();
        let mut sizes: Vec<usize> = scaled.iter().map(|q| q.floor() as usize).collect();
        let mut short = self.n - sizes.iter().sum::<usize>();
        let mut order: Vec<usize> = (0..sizes.len()).collect();
        order.sort_by(|&a, &b| (scaled[b] - scaled[b].floor()).total_cmp(&(scaled[a] - scaled[a].floor())).then(a.cmp(&b)));
        for &i in order.iter().cycle() {
            if short == 0 {
                break;
            }
            sizes[i] += 1;
            short -= 1;
        }
        if sizes[0] == 0 {
            return Err(GraphError::Config("group C_1 is empty after rounding".into()));
        }
        Ok(sizes)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CameoConfig {
    pub n: usize,
    pub alpha: f64,
    /// Law of the trait `ω`; must have a density.
    pub trait_law: Distribution,
    /// Law of the number of choices per vertex, rounded to the nearest
    /// nonnegative integer.
    pub out_degree: Distribution,
}

impl CameoConfig {
    pub fn validate(&self) -> Result<(), GraphError> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(GraphError::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if !self.trait_law.is_continuous() {
            return Err(GraphError::Config(format!("trait law {} has no density", self.trait_law)));
        }
        if self.out_degree.support_bounds().0 < 0.0 {
            return Err(GraphError::Config(format!("out-degree law {} allows negative values", self.out_degree)));
        }
        match self.trait_law.density_power_integral(1.0 - self.alpha) {
            Ok(v) if v.is_finite() => Ok(()),
            Ok(v) => Err(GraphError::Config(format!("∫φ^(1-α) = {v} is not finite"))),
            Err(e) => Err(GraphError::Config(format!("∫φ^(1-α) does not converge: {e}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneratedGraph {
    /// Undirected simple edges `(u, v)` with `u < v`, sorted.
    pub edges: Vec<(u32, u32)>,
    /// Group index (DMA) or trait value (Cameo) per vertex.
    pub label: Vec<f64>,
    pub d_out: Vec<u32>,
    pub d_in: Vec<u32>,
    /// Degree in the simple undirected graph.
    pub d: Vec<u32>,
    /// Number of directed choices made.
    pub choices: u64,
    /// `n / Σ_y w(y)` for the realized target weights.
    pub normalization: f64,
}

impl GeneratedGraph {
    pub fn vertex_count(&self) -> usize {
        self.d.len()
    }

    /// Assembles a graph from the directed choice list.
    fn from_choices(n: usize, label: Vec<f64>, choices: &[(u32, u32)], normalization: f64) -> Self {
        let mut d_out = vec![0u32; n];
        let mut d_in = vec![0u32; n];
        let mut set = HashSet::with_capacity(choices.len());
        for &(x, y) in choices {
            d_out[x as usize] += 1;
            d_in[y as usize] += 1;
            set.insert((x.min(y), x.max(y)));
        }
        let mut edges: Vec<(u32, u32)> = set.into_iter().collect();
        edges.sort_unstable();
        let mut d = vec![0u32; n];
        for &(u, v) in &edges {
            d[u as usize] += 1;
            d[v as usize] += 1;
        }
        Self { edges, label, d_out, d_in, d, choices: choices.len() as u64, normalization }
    }
}

/// Draws targets with `pick` until one differs from `from`.
fn choose_other<R: Rng>(rng: &mut R, from: u32, mut pick: impl FnMut(&mut R) -> u32) -> u32 {
    loop {
        let y = pick(rng);
        if y != from {
            return y;
        }
    }
}

pub fn generate_dma_graph(config: &DmaConfig, stream: Stream) -> Result<GeneratedGraph, GraphError> {
    let sizes = config.group_sizes()?;
    let n = config.n;
    let mut starts = Vec::with_capacity(sizes.len() + 1);
    let mut label = Vec::with_capacity(n);
    let mut acc = 0usize;
    for (g, &s) in sizes.iter().enumerate() {
        starts.push(acc);
        acc += s;
        label.extend(std::iter::repeat_n((g + 1) as f64, s));
    }
    starts.push(acc);
    let weight_sum: f64 = sizes.iter().enumerate().map(|(g, &s)| s as f64 * ((g + 1) as f64).powf(config.alpha)).sum();
    let normalization = n as f64 / weight_sum;
    let mut choices = Vec::new();
    if n >= 2 {
        let group_weights: Vec<f64> = sizes.iter().enumerate().map(|(g, &s)| s as f64 * ((g + 1) as f64).powf(config.alpha)).collect();
        let alias = WeightedAliasIndex::new(group_weights).map_err(|e| GraphError::Config(e.to_string()))?;
        let mut rng = stream.rng();
        for (g, &s) in sizes.iter().enumerate() {
            for x in starts[g]..starts[g] + s {
                for _ in 0..=g {
                    let y = choose_other(&mut rng, x as u32, |r| {
                        let j = alias.sample(r);
                        (starts[j] + r.random_range(0..sizes[j])) as u32
                    });
                    choices.push((x as u32, y));
                }
            }
        }
    }
    Ok(GeneratedGraph::from_choices(n, label, &choices, normalization))
}

pub fn generate_cameo_graph(config: &CameoConfig, stream: Stream) -> Result<GeneratedGraph, GraphError> {
    config.validate()?;
    let n = config.n;
    let mut trait_rng = stream.named("trait").rng();
    let omega: Vec<f64> = (0..n).map(|_| config.trait_law.sample(&mut trait_rng)).collect();
    // Work in log space: weights φ^{-α} can span many decades.
    let log_w: Vec<f64> = omega.iter().map(|&w| -config.alpha * config.trait_law.density(w).unwrap_or(0.0).ln()).collect();
    let top = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = log_w.iter().map(|l| (l - top).exp()).collect();
    let weight_sum: f64 = log_w.iter().map(|l| l.exp()).sum();
    let normalization = n as f64 / weight_sum;
    let mut choices = Vec::new();
    if n >= 2 {
        let alias = WeightedAliasIndex::new(weights).map_err(|e| GraphError::Config(e.to_string()))?;
        let mut deg_rng = stream.named("out-degree").rng();
        let mut rng = stream.named("choices").rng();
        for x in 0..n as u32 {
            let k = config.out_degree.sample(&mut deg_rng).round().max(0.0) as u64;
            for _ in 0..k {
                let y = choose_other(&mut rng, x, |r| alias.sample(r) as u32);
                choices.push((x, y));
            }
        }
    }
    Ok(GeneratedGraph::from_choices(n, omega, &choices, normalization))
}

/// Density of `ω* = φ(ω)^{-α}` when `φ` is exponential with rate `λ`:
/// `(1/α) λ^{-1} z^{-1-1/α}` on `z ≥ λ^{-α}`, zero below.
pub fn omega_star_density(trait_law: &Distribution, alpha: f64, z: f64) -> Result<f64, GraphError> {
    let Distribution::Exponential { rate } = *trait_law else {
        return Err(GraphError::Config(format!("closed form needs an exponential trait law, got {trait_law}")));
    };
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(GraphError::Config(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if z < rate.powf(-alpha) {
        return Ok(0.0);
    }
    Ok(z.powf(-1.0 - 1.0 / alpha) / (alpha * rate))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegreeStats {
    pub d_in: Vec<u32>,
    pub d_out: Vec<u32>,
    pub d: Vec<u32>,
    pub fit: Option<TailFit>,
}

/// Degree sequences plus a log-log fit of the total-degree CCDF over
/// `window`, or over `[90th percentile, max]` when no window is given.
/// A failed fit leaves `fit` empty.
pub fn degree_stats(g: &GeneratedGraph, window: Option<(f64, f64)>) -> DegreeStats {
    let fit = EmpiricalDistribution::new(g.d.iter().map(|&k| k as f64).collect()).ok().and_then(|e| {
        let (lo, hi) = window.unwrap_or((e.quantile(0.9).max(1.0), e.max()));
        tail::fit_tail_loglog(&e, lo, hi).ok()
    });
    DegreeStats { d_in: g.d_in.clone(), d_out: g.d_out.clone(), d: g.d.clone(), fit }
}

/// Log-log regression of mean in-degree per DMA group against the group
/// index, over groups with at least `min_group` vertices.
pub fn in_degree_vs_group(g: &GeneratedGraph, min_group: usize) -> Result<LineFit, GraphError> {
    let groups = g.label.iter().fold(0usize, |m, &l| m.max(l as usize));
    let mut sum = vec![0.0; groups + 1];
    let mut count = vec![0usize; groups + 1];
    for (l, &din) in g.label.iter().zip(&g.d_in) {
        sum[*l as usize] += din as f64;
        count[*l as usize] += 1;
    }
    let pts: Vec<(f64, f64)> = (1..=groups).filter(|&i| count[i] >= min_group).map(|i| (i as f64, sum[i] / count[i] as f64)).collect();
    Ok(tail::loglog_regression(&pts)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zeta_values() {
        assert!((zeta(2.0) - std::f64::consts::PI.powi(2) / 6.0).abs() < 1e-12);
        assert!((zeta(3.0) - 1.202_056_903_159_594_3).abs() < 1e-12);
    }

    #[test]
    fn group_sizes_sum_to_n() {
        for n in [2, 10, 1000, 100_000] {
            let c = DmaConfig::new(n, 3.0, 1.0).unwrap();
            let s = c.group_sizes().unwrap();
            assert_eq!(s.iter().sum::<usize>(), n);
            assert!(s[0] > 0);
        }
        let mut bad = DmaConfig::new(10, 3.0, 1.0).unwrap();
        bad.c1 = 0.01;
        assert!(bad.group_sizes().is_err());
        assert!(DmaConfig::new(10, 1.5, 0.0).is_err());
        assert!(DmaConfig::new(10, 3.0, 2.5).is_err());
    }

    #[test]
    fn two_vertices_always_pair() {
        let c = DmaConfig::new(2, 3.0, 0.5).unwrap();
        for seed in 0..20 {
            let g = generate_dma_graph(&c, Stream::new(seed)).unwrap();
            assert_eq!(g.d_out, vec![1, 1]);
            assert_eq!(g.edges, vec![(0, 1)]);
            assert_eq!(g.d, vec![1, 1]);
        }
    }

    #[test]
    fn single_vertex_cameo_is_empty() {
        let c = CameoConfig { n: 1, alpha: 0.5, trait_law: Distribution::exponential(1.0).unwrap(), out_degree: Distribution::point(3.0).unwrap() };
        let g = generate_cameo_graph(&c, Stream::new(1)).unwrap();
        assert!(g.edges.is_empty());
        assert_eq!(g.choices, 0);
    }

    #[test]
    fn omega_star_closed_form() {
        let e = Distribution::exponential(1.0).unwrap();
        assert!((omega_star_density(&e, 0.5, 1.0).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(omega_star_density(&e, 0.5, 0.9).unwrap(), 0.0);
        let e2 = Distribution::exponential(2.5).unwrap();
        let lo = 2.5f64.powf(-0.3);
        let total = tailsim_core::quad::integrate_to_infinity(|z| omega_star_density(&e2, 0.3, z).unwrap(), lo, 1e-11).unwrap();
        assert!((total - 1.0).abs() < 1e-8, "{total}");
    }

    #[test]
    fn rejects_non_integrable_trait_law() {
        let c = CameoConfig { n: 10, alpha: 0.5, trait_law: "pareto:B=1,omega=1.5".parse().unwrap(), out_degree: Distribution::point(1.0).unwrap() };
        assert!(c.validate().is_err());
    }
}
