//! Laminar phases of a threshold-crossing process.
//!
//! A state `x ~ F` and a threshold `y ~ G`, both on `[0, 1]`, are drawn at
//! `t = 0`. While `x < y` the system is laminar; at each later step, with
//! probability `η` only `x` is redrawn (the threshold is kept), otherwise both
//! are redrawn. The laminar length `T` is the step at which `x ≥ y` first
//! holds. `P(T)` is computed here by simulation, by generating-function
//! series, by closed forms at `η ∈ {0, 1}`, and for uniform laws by an
//! independent nested-sum formula.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Num, One, ToPrimitive};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::beta::ln_beta;
use statrs::function::gamma::ln_gamma;
use tailsim_core::quad::{self, QuadError};
use tailsim_core::series::{self, from_count, PowerSeries};
use tailsim_core::{Distribution, Stream};
use thiserror::Error;

pub const DEFAULT_T_CAP: usize = 10_000;
/// Episodes are split over this many independent substreams, so results do
/// not depend on the worker count.
pub const SHARDS: u64 = 64;
pub const MAX_NESTED_T: usize = 8;
const MOMENT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntermittencyError {
    #[error("invalid model: {0}")]
    Model(String),
    #[error("moment quadrature failed: {0}")]
    Numeric(#[from] QuadError),
    #[error("{what} requires {requirement}")]
    Range { what: &'static str, requirement: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdModel {
    pub state: Distribution,
    pub threshold: Distribution,
    pub eta: f64,
}

impl ThresholdModel {
    pub fn new(state: Distribution, threshold: Distribution, eta: f64) -> Result<Self, IntermittencyError> {
        let m = Self { state, threshold, eta };
        m.validate()?;
        Ok(m)
    }

    pub fn uniform(eta: f64) -> Result<Self, IntermittencyError> {
        Self::new(Distribution::uniform(), Distribution::uniform(), eta)
    }

    pub fn validate(&self) -> Result<(), IntermittencyError> {
        for (name, d) in [("state", &self.state), ("threshold", &self.threshold)] {
            let (lo, hi) = d.support_bounds();
            if lo < 0.0 || hi > 1.0 {
                return Err(IntermittencyError::Model(format!("{name} law {d} is not supported on [0, 1]")));
            }
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(IntermittencyError::Model(format!("eta must lie in [0, 1], got {}", self.eta)));
        }
        Ok(())
    }

    pub fn with_eta(&self, eta: f64) -> Self {
        Self { eta, ..*self }
    }
}

/// `A(n) = ∫ dG F^n` and `B(n) = A(n) − A(n+1)` for `n = 0..=n_max`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentTable {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl MomentTable {
    pub fn n_max(&self) -> usize {
        self.a.len() - 1
    }
}

/// `(ν, p, q)` with `F(u) = u^ν` and `dG ∝ u^p (1-u)^q` when both laws
/// belong to these families.
fn beta_family(model: &ThresholdModel) -> Option<(f64, f64, f64)> {
    let nu = match model.state {
        Distribution::Uniform { lo, hi } if lo == 0.0 && hi == 1.0 => 1.0,
        Distribution::PowerDensity { alpha } => 1.0 + alpha,
        _ => return None,
    };
    let (p, q) = match model.threshold {
        Distribution::Uniform { lo, hi } if lo == 0.0 && hi == 1.0 => (0.0, 0.0),
        Distribution::PowerDensity { alpha } => (alpha, 0.0),
        Distribution::BetaLike { alpha, beta } => (alpha, beta),
        _ => return None,
    };
    Some((nu, p, q))
}

pub fn moments(model: &ThresholdModel, n_max: usize) -> Result<MomentTable, IntermittencyError> {
    model.validate()?;
    let idx = 0..=n_max;
    let (a, b): (Vec<f64>, Vec<f64>) = if let Some((nu, p, q)) = beta_family(model) {
        if nu == 1.0 && p == 0.0 && q == 0.0 {
            idx.map(|n| {
                let n = n as f64;
                (1.0 / (n + 1.0), 1.0 / ((n + 1.0) * (n + 2.0)))
            })
            .unzip()
        } else {
            let ln_a = |n: usize| ln_beta(p + 1.0 + nu * n as f64, q + 1.0) - ln_beta(p + 1.0, q + 1.0);
            idx.map(|n| {
                let (la, lb) = (ln_a(n), ln_a(n + 1));
                let a = la.exp();
                (a, -a * (lb - la).exp_m1())
            })
            .unzip()
        }
    } else {
        match model.threshold {
            Distribution::Point { at } => {
                let f = model.state.cdf(at);
                idx.map(|n| (f.powi(n as i32), f.powi(n as i32) * (1.0 - f))).unzip()
            }
            Distribution::TwoPoint { a: ya, b: yb, p } => {
                let (fa, fb) = (model.state.cdf(ya), model.state.cdf(yb));
                idx.map(|n| {
                    let n = n as i32;
                    let a = p * fa.powi(n) + (1.0 - p) * fb.powi(n);
                    let b = p * fa.powi(n) * (1.0 - fa) + (1.0 - p) * fb.powi(n) * (1.0 - fb);
                    (a, b)
                })
                .unzip()
            }
            g => {
                let (lo, hi) = g.support_bounds();
                let mut a = Vec::with_capacity(n_max + 1);
                let mut b = Vec::with_capacity(n_max + 1);
                for n in idx {
                    let n = n as i32;
                    let dens = |y: f64| g.density(y).unwrap_or(0.0);
                    a.push(quad::integrate(|y| model.state.cdf(y).powi(n) * dens(y), lo, hi, MOMENT_TOL)?);
                    b.push(quad::integrate(
                        |y| {
                            let f = model.state.cdf(y);
                            f.powi(n) * (1.0 - f) * dens(y)
                        },
                        lo,
                        hi,
                        MOMENT_TOL,
                    )?);
                }
                (a, b)
            }
        }
    };
    Ok(MomentTable { a, b })
}

fn factorial(n: u64) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, k| acc * BigInt::from(k))
}

/// Beta function at positive integer arguments, exactly.
fn beta_int(x: u64, y: u64) -> BigRational {
    BigRational::new(factorial(x - 1) * factorial(y - 1), factorial(x + y - 1))
}

fn as_nonneg_int(v: f64) -> Option<u64> {
    (v >= 0.0 && v.fract() == 0.0 && v < 1e6).then_some(v as u64)
}

/// Exact rational moments, available when the laws are uniform, power
/// densities or beta-like with nonnegative integer exponents.
pub fn exact_moments(model: &ThresholdModel, n_max: usize) -> Option<(Vec<BigRational>, Vec<BigRational>)> {
    let (nu, p, q) = beta_family(model)?;
    let (nu, p, q) = (as_nonneg_int(nu)?, as_nonneg_int(p)?, as_nonneg_int(q)?);
    let norm = beta_int(p + 1, q + 1);
    let a: Vec<BigRational> = (0..=n_max as u64 + 1).map(|n| beta_int(p + 1 + nu * n, q + 1) / norm.clone()).collect();
    let b = (0..=n_max).map(|n| a[n].clone() - a[n + 1].clone()).collect();
    let mut a = a;
    a.truncate(n_max + 1);
    Some((a, b))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Provenance {
    MonteCarlo { episodes: u64, censored: u64 },
    Series,
    ClosedForm,
}

/// `P(0..=T_max)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LaminarPhasePmf {
    pub values: Vec<f64>,
    pub provenance: Provenance,
    /// Raw counts behind Monte Carlo values.
    pub counts: Option<Vec<u64>>,
}

impl LaminarPhasePmf {
    pub fn t_max(&self) -> usize {
        self.values.len() - 1
    }

    /// Binomial standard error of each Monte Carlo value.
    pub fn standard_errors(&self) -> Option<Vec<f64>> {
        let Provenance::MonteCarlo { episodes, .. } = self.provenance else {
            return None;
        };
        let n = episodes as f64;
        Some(self.values.iter().map(|p| (p * (1.0 - p) / n).sqrt()).collect())
    }
}

fn run_episode<R: Rng>(model: &ThresholdModel, rng: &mut R, t_cap: usize) -> Option<usize> {
    let mut x = model.state.sample(rng);
    let mut y = model.threshold.sample(rng);
    let mut t = 0;
    while x < y {
        t += 1;
        if t > t_cap {
            return None;
        }
        if model.eta == 1.0 || rng.random::<f64>() < model.eta {
            x = model.state.sample(rng);
        } else {
            x = model.state.sample(rng);
            y = model.threshold.sample(rng);
        }
    }
    Some(t)
}

/// Monte Carlo estimate of `P(0..=t_cap)`; longer episodes are censored and
/// counted in the provenance.
pub fn simulate_episodes(model: &ThresholdModel, n_episodes: u64, t_cap: usize, stream: Stream) -> LaminarPhasePmf {
    let per = n_episodes / SHARDS;
    let extra = n_episodes % SHARDS;
    let (counts, censored) = (0..SHARDS)
        .into_par_iter()
        .map(|shard| {
            let n = per + u64::from(shard < extra);
            let mut rng = stream.child(shard).rng();
            let mut counts = vec![0u64; t_cap + 1];
            let mut censored = 0u64;
            for _ in 0..n {
                match run_episode(model, &mut rng, t_cap) {
                    Some(t) => counts[t] += 1,
                    None => censored += 1,
                }
            }
            (counts, censored)
        })
        .reduce(
            || (vec![0u64; t_cap + 1], 0),
            |(mut a, ca), (b, cb)| {
                a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                (a, ca + cb)
            },
        );
    let n = n_episodes.max(1) as f64;
    LaminarPhasePmf {
        values: counts.iter().map(|&c| c as f64 / n).collect(),
        provenance: Provenance::MonteCarlo { episodes: n_episodes, censored },
        counts: Some(counts),
    }
}

/// Generating function `P̂(s)` to order `t_max`, assembled from moment
/// sequences `a[0..=t_max+2]`, `b[0..=t_max+1]`.
pub fn assemble_generating_function<T: Num + Clone>(a: &[T], b: &[T], eta: T, t_max: usize) -> PowerSeries<T> {
    let n = t_max;
    let one_minus = T::one() - eta.clone();
    let a1 = a[1].clone();
    let b0 = b[0].clone();
    let mut eta_pow = T::one();
    let mut u_pow = T::one();
    let mut a1_pow = T::one();
    let mut p = vec![T::zero(); n + 1];
    let mut q = vec![T::zero(); n + 1];
    let mut r = vec![T::zero(); n + 1];
    for l in 1..=n {
        eta_pow = eta_pow * eta.clone();
        u_pow = u_pow * one_minus.clone();
        if l > 1 {
            a1_pow = a1_pow * a1.clone();
        }
        p[l] = eta_pow.clone() * a[l + 1].clone();
        q[l] = u_pow.clone() * a1_pow.clone();
        r[l] = eta_pow.clone() * (eta.clone() * b[l + 1].clone() + one_minus.clone() * a[l + 1].clone() * b0.clone());
    }
    let rho = eta.clone() * b[1].clone() + one_minus * a1.clone() * b0.clone();
    let (p, q, r) = (PowerSeries::new(p, n), PowerSeries::new(q, n), PowerSeries::new(r, n));
    let pq = &p * &q;
    let numer = &(&(&r + &pq.scale(&rho)) + &q.scale(&(rho.clone() * a1.clone()))) + &(&q * &r).scale(&a1);
    let denom = &PowerSeries::one(n) - &pq;
    let frac = &numer * &denom.recip().expect("constant term is one");
    let head = PowerSeries::new(vec![b0, rho], n);
    &head + &frac.shift(1)
}

/// `P(0..=t_max)` by series inversion of the generating function. At
/// `η = 1` this returns `B(T)` directly.
pub fn pmf_series(model: &ThresholdModel, t_max: usize) -> Result<LaminarPhasePmf, IntermittencyError> {
    let m = moments(model, t_max + 2)?;
    if model.eta == 1.0 {
        return Ok(LaminarPhasePmf { values: m.b[..=t_max].to_vec(), provenance: Provenance::ClosedForm, counts: None });
    }
    let gf = assemble_generating_function(&m.a, &m.b, model.eta, t_max);
    Ok(LaminarPhasePmf { values: gf.coeffs().to_vec(), provenance: Provenance::Series, counts: None })
}

/// Exact-rational `P(0..=t_max)` for models with rational moments; `eta`
/// is taken as given rather than converted from the model's float.
pub fn pmf_series_exact(model: &ThresholdModel, eta: &BigRational, t_max: usize) -> Option<Vec<BigRational>> {
    let (a, b) = exact_moments(model, t_max + 2)?;
    Some(assemble_generating_function(&a, &b, eta.clone(), t_max).coeffs().to_vec())
}

pub fn pmf_eta0(m: &MomentTable, t: usize) -> f64 {
    m.a[1].powi(t as i32) * m.b[0]
}

pub fn pmf_eta1(m: &MomentTable, t: usize) -> f64 {
    m.b[t]
}

/// `P_{η=1}(T)` for `dF = (1+α)u^α du` and `dG = (1+β)(1-u)^β du`, as a
/// difference of Gamma ratios evaluated in log space.
pub fn pmf_eta1_beta(alpha: f64, beta: f64, t: u64) -> Result<f64, IntermittencyError> {
    if !(alpha > -1.0 && beta > -1.0) {
        return Err(IntermittencyError::Range { what: "pmf_eta1_beta", requirement: "alpha, beta > -1".into() });
    }
    let c = 1.0 + alpha;
    let x = 1.0 + t as f64 * c;
    let l0 = ln_gamma(2.0 + beta) + ln_gamma(x) - ln_gamma(x + 1.0 + beta);
    // l1 - l0 is O(1/T); form it from shifted log-gamma differences so it
    // keeps full relative precision.
    let step = ln_gamma_shift(x, c) - ln_gamma_shift(x + 1.0 + beta, c);
    Ok(-l0.exp() * step.exp_m1())
}

/// `ln Γ(x+h) - ln Γ(x)` without cancellation for large `x`.
fn ln_gamma_shift(x: f64, h: f64) -> f64 {
    if x < 20.0 {
        return ln_gamma(x + h) - ln_gamma(x);
    }
    let y = x + h;
    // Stirling series, terms through x^-9.
    let tail = |z: f64| {
        let z2 = 1.0 / (z * z);
        (1.0 / z) * (1.0 / 12.0 - z2 * (1.0 / 360.0 - z2 * (1.0 / 1260.0 - z2 * (1.0 / 1680.0 - z2 / 1188.0))))
    };
    (x - 0.5) * (h / x).ln_1p() + h * y.ln() - h + (tail(y) - tail(x))
}

/// Large-`T` asymptote `(1+β)Γ(2+β)(1+α)^{-1-β} / T^{2+β}`.
pub fn pmf_eta1_beta_asymptote(alpha: f64, beta: f64, t: f64) -> f64 {
    ((1.0 + beta).ln() + ln_gamma(2.0 + beta) - (1.0 + beta) * (1.0 + alpha).ln() - (2.0 + beta) * t.ln()).exp()
}

/// Lower and upper bounds on `P(T)` valid for every `η`.
pub fn pmf_bounds(m: &MomentTable, eta: f64, t: usize) -> (f64, f64) {
    let (a1, b0) = (m.a[1], m.b[0]);
    if t == 0 {
        return (b0, b0);
    }
    let ti = t as i32;
    let lower = eta.powi(ti) * m.b[t] + (1.0 - eta) * a1.powi(ti) * b0;
    let mix = eta + (1.0 - eta) * a1;
    let upper = eta.powi(ti) * m.b[t] + (1.0 - eta) * a1 * b0 * mix.powi(ti - 1) + eta * a1 * (mix.powi(ti - 1) - eta.powi(ti - 1));
    (lower, upper)
}

/// Generating function for uniform `F` and `G` in closed form through
/// `γ(s) = ln(1-ηs)/(ηs)`, generic over the coefficient type.
pub fn uniform_generating_function<T: Num + Clone>(eta: T, t_max: usize) -> Result<PowerSeries<T>, IntermittencyError> {
    if eta.is_zero() {
        return Err(IntermittencyError::Range { what: "uniform generating function", requirement: "eta > 0".into() });
    }
    // One extra order: (1 + γ)/s drops a power of s.
    let n = t_max + 1;
    let mut pow = T::one();
    let gamma = PowerSeries::from_fn(n, |j| {
        if j > 0 {
            pow = pow.clone() * eta.clone();
        }
        T::zero() - pow.clone() / from_count(j + 1)
    });
    let one = PowerSeries::one(n);
    let one_plus = &one + &gamma;
    // (1 + γ) has zero constant term; divide by s by shifting down.
    let over_s = PowerSeries::from_fn(t_max, |k| one_plus.coeffs()[k + 1].clone());
    let numer = &over_s - &gamma.truncate(t_max).scale(&eta);
    let denom = &one.truncate(t_max) + &gamma.truncate(t_max).scale(&(T::one() - eta));
    let inv = denom.recip().map_err(|_| IntermittencyError::Range { what: "uniform generating function", requirement: "eta > 0".into() })?;
    Ok(&numer * &inv)
}

pub fn pmf_uniform_gf(eta: f64, t_max: usize) -> Result<LaminarPhasePmf, IntermittencyError> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(IntermittencyError::Range { what: "pmf_uniform_gf", requirement: "0 < eta < 1".into() });
    }
    let gf = uniform_generating_function(eta, t_max)?;
    Ok(LaminarPhasePmf { values: gf.coeffs().to_vec(), provenance: Provenance::Series, counts: None })
}

fn compositions(k: usize, m: usize, f: &mut impl FnMut(&[usize])) {
    fn go(rest: usize, left: usize, buf: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if left == 1 {
            buf.push(rest);
            f(buf);
            buf.pop();
            return;
        }
        for first in 1..=rest - (left - 1) {
            buf.push(first);
            go(rest - first, left - 1, buf, f);
            buf.pop();
        }
    }
    if m >= 1 && k >= m {
        go(k, m, &mut Vec::with_capacity(m), f);
    }
}

/// `c(m, k)` by enumerating compositions `l_1 + ... + l_m = k`, `l_i ≥ 1`.
pub fn nested_coefficient(m: usize, k: usize) -> f64 {
    let mut total = 0.0;
    compositions(k, m, &mut |ls| {
        let mut term = 1.0;
        let mut used = 0;
        for (i, &l) in ls.iter().enumerate() {
            term *= l as f64 / (l + 1) as f64;
            used += l;
            if i + 1 < ls.len() {
                term /= (k - used) as f64;
            }
        }
        total += term;
    });
    let m_fact: f64 = (1..=m).map(|i| i as f64).product();
    m_fact * total
}

/// `P(T)` for uniform laws from the nested-sum inversion, `T ≤ 8`.
pub fn pmf_uniform_nested(eta: f64, t: usize) -> Result<f64, IntermittencyError> {
    if t > MAX_NESTED_T {
        return Err(IntermittencyError::Range { what: "pmf_uniform_nested", requirement: format!("T <= {MAX_NESTED_T}") });
    }
    let tf = t as f64;
    let lead = eta.powi(t as i32) / ((tf + 1.0) * (tf + 2.0));
    if eta == 0.0 {
        // η^T (1-η)^m/η^m with m = k = T is the only surviving term: (1-η)^T c(T,T)/((1)(2)T).
        if t == 0 {
            return Ok(0.5);
        }
        return Ok(nested_coefficient(t, t) / (2.0 * tf));
    }
    let ratio = (1.0 - eta) / eta;
    let mut sum = 0.0;
    for k in 1..=t {
        let inner: f64 = (1..=k).map(|m| ratio.powi(m as i32) * nested_coefficient(m, k)).sum();
        let d = (t - k) as f64;
        sum += eta.powi(t as i32) / ((d + 1.0) * (d + 2.0) * k as f64) * inner;
    }
    Ok(lead + sum)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Crossover {
    pub s0: f64,
    pub s1: f64,
    /// `1 - ηs₀`, which underflows `s₁ - s₀` long before it reaches zero.
    pub gap: f64,
    pub ln_s0: f64,
    /// `1 / ln s₀`.
    pub t_c: f64,
    /// `η < 1/s₀ ≤ (1+η)/2`.
    pub bound_holds: bool,
}

/// Root `s₀ ∈ (1, 1/η)` of `-ln(1-ηs) = sη/(1-η)`.
///
/// The root sits within `e^{-1/(1-η)}` of `1/η`, so the bisection runs on
/// `v = -ln(1-ηs₀)`, which solves `(1-η)v = 1 - e^{-v}`, until the bracket
/// cannot shrink further.
pub fn crossover(eta: f64) -> Result<Crossover, IntermittencyError> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(IntermittencyError::Range { what: "crossover", requirement: "0 < eta < 1".into() });
    }
    let g = |v: f64| (1.0 - eta) * v + (-v).exp_m1();
    let (mut lo, mut hi) = (-(-eta).ln_1p(), 1.0 / (1.0 - eta) + 1.0);
    if !(g(lo) < 0.0 && g(hi) > 0.0) {
        return Err(IntermittencyError::Range { what: "crossover", requirement: "a sign change on (1, 1/eta)".into() });
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let v = if g(lo).abs() <= g(hi).abs() { lo } else { hi };
    let gap = (-v).exp();
    let s0 = -(-v).exp_m1() / eta;
    let ln_s0 = s0.ln();
    // 1/s₀ = η/(1-gap): the lower bound is gap > 0, the upper 2η ≤ (1+η)(1-gap).
    let bound_holds = gap > 0.0 && 2.0 * eta <= (1.0 + eta) * (1.0 - gap);
    Ok(Crossover { s0, s1: 1.0 / eta, gap, ln_s0, t_c: 1.0 / ln_s0, bound_holds })
}

/// Geometric bins of a PMF on `[lo, hi)`: `(centre, mean P per unit T)`,
/// with empty bins dropped.
pub fn log_binned(values: &[f64], lo: usize, hi: usize, bins: usize) -> Vec<(f64, f64)> {
    let ratio = (hi as f64 / lo as f64).powf(1.0 / bins as f64);
    let mut edges: Vec<usize> = (0..=bins).map(|i| (lo as f64 * ratio.powi(i as i32)).round() as usize).collect();
    edges.dedup();
    edges
        .windows(2)
        .filter_map(|w| {
            let (a, b) = (w[0], w[1].min(values.len()));
            if b <= a {
                return None;
            }
            let mass: f64 = values[a..b].iter().sum();
            (mass > 0.0).then(|| (((a as f64 + 1.0) * (b as f64 + 1.0)).sqrt(), mass / (b - a) as f64))
        })
        .collect()
}

pub fn to_f64(v: &BigRational) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

/// Rational `η` from a decimal float such as `0.7`, by way of its shortest
/// decimal representation.
pub fn decimal_eta(eta: f64) -> BigRational {
    let s = format!("{eta}");
    match s.split_once('.') {
        Some((int, frac)) => {
            let den = BigInt::from(10u32).pow(frac.len() as u32);
            let num: BigInt = format!("{int}{frac}").parse().expect("decimal digits");
            BigRational::new(num, den)
        }
        None => series::exact(eta),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tailsim_core::series::ratio;

    #[test]
    fn uniform_moments() {
        let m = moments(&ThresholdModel::uniform(0.5).unwrap(), 5).unwrap();
        assert_eq!(m.a[0], 1.0);
        assert_eq!(m.b[0], 0.5);
        assert!((m.b[1] - 1.0 / 6.0).abs() < 1e-16);
        let bl = ThresholdModel::new(Distribution::uniform(), Distribution::beta_like(0.0, 0.0).unwrap(), 0.5).unwrap();
        let mb = moments(&bl, 5).unwrap();
        for n in 0..=5 {
            assert!((mb.a[n] - m.a[n]).abs() < 1e-15 && (mb.b[n] - m.b[n]).abs() < 1e-15);
        }
    }

    #[test]
    fn low_order_terms() {
        let model = ThresholdModel::new(Distribution::power_density(0.7).unwrap(), Distribution::beta_like(1.0, 2.0).unwrap(), 0.3).unwrap();
        let m = moments(&model, 10).unwrap();
        let p = pmf_series(&model, 8).unwrap().values;
        let eta = model.eta;
        assert!((p[0] - m.b[0]).abs() < 1e-15);
        assert!((p[1] - (eta * m.b[1] + (1.0 - eta) * m.a[1] * m.b[0])).abs() < 1e-15);
        let p2 = eta * eta * m.b[2] + eta * (1.0 - eta) * (m.a[1] * m.b[1] + m.a[2] * m.b[0]) + (1.0 - eta).powi(2) * m.a[1].powi(2) * m.b[0];
        assert!((p[2] - p2).abs() < 1e-15);
    }

    #[test]
    fn uniform_half_examples() {
        let p = pmf_series(&ThresholdModel::uniform(0.5).unwrap(), 4).unwrap().values;
        assert!((p[1] - 0.208_333_333_333_333_3).abs() < 1e-15);
        assert!((p[2] - 0.114_583_333_333_333_3).abs() < 1e-15);
        let g = pmf_uniform_gf(0.5, 4).unwrap().values;
        assert!((g[2] - p[2]).abs() < 1e-12);
        assert!((pmf_uniform_nested(0.5, 2).unwrap() - g[2]).abs() < 1e-12);
    }

    #[test]
    fn exact_eta0_and_eta1() {
        let model = ThresholdModel::uniform(0.0).unwrap();
        let p = pmf_series_exact(&model, &BigRational::from_integer(BigInt::from(0)), 30).unwrap();
        for (t, v) in p.iter().enumerate() {
            assert_eq!(*v, BigRational::new(BigInt::one(), BigInt::from(2).pow(t as u32 + 1)));
        }
        let p1 = pmf_series_exact(&model, &BigRational::one(), 30).unwrap();
        for (t, v) in p1.iter().enumerate() {
            assert_eq!(*v, ratio(1, ((t + 1) * (t + 2)) as i64));
        }
    }

    #[test]
    fn nested_edge_cases() {
        assert!((pmf_uniform_nested(0.0, 2).unwrap() - 0.125).abs() < 1e-15);
        for t in 0..=8 {
            let want = 1.0 / ((t + 1) * (t + 2)) as f64;
            assert!((pmf_uniform_nested(1.0, t).unwrap() - want).abs() < 1e-15);
        }
        assert!(pmf_uniform_nested(0.5, 9).is_err());
    }

    #[test]
    fn crossover_half() {
        let c = crossover(0.5).unwrap();
        assert!((c.s0 - 1.5936).abs() < 1e-4, "{}", c.s0);
        assert!((-(1.0 - 0.5 * c.s0).ln() - c.s0).abs() < 1e-12);
        assert!(c.bound_holds && c.s0 > 1.0 && c.s0 < c.s1);
    }

    #[test]
    fn point_threshold_at_zero() {
        let model = ThresholdModel::new(Distribution::uniform(), Distribution::point(0.0).unwrap(), 0.4).unwrap();
        let pmf = simulate_episodes(&model, 1000, 10, Stream::new(3));
        assert_eq!(pmf.values[0], 1.0);
        let m = moments(&model, 3).unwrap();
        assert_eq!(m.b[0], 1.0);
        assert_eq!(m.a[1], 0.0);
    }

    #[test]
    fn beta_formula_reduces_to_uniform() {
        for t in [0u64, 1, 5, 100, 10_000] {
            let want = 1.0 / ((t + 1) as f64 * (t + 2) as f64);
            let got = pmf_eta1_beta(0.0, 0.0, t).unwrap();
            assert!((got / want - 1.0).abs() < 1e-9, "{t} {got} {want}");
        }
    }

    #[test]
    fn decimal_eta_is_exact() {
        assert_eq!(decimal_eta(0.7), ratio(7, 10));
        assert_eq!(decimal_eta(0.5), ratio(1, 2));
    }
}
