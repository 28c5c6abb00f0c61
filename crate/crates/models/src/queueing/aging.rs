//! Aging population of waiting tasks: `∂M/∂t + p(a) ∂M/∂a + μ(a) M = G(a)`.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use tailsim_core::tail::{self, LineFit};

use super::QueueError;

/// Trapezoid substeps per grid cell for the cumulative integrals.
const SUBSTEPS: usize = 16;

/// `coef · a^exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AgeRate {
    pub coef: f64,
    pub exponent: f64,
}

impl AgeRate {
    pub fn constant(c: f64) -> Self {
        Self { coef: c, exponent: 0.0 }
    }

    pub fn power(coef: f64, exponent: f64) -> Self {
        Self { coef, exponent }
    }

    pub fn eval(&self, a: f64) -> f64 {
        if self.exponent == 0.0 {
            self.coef
        } else {
            self.coef * a.powf(self.exponent)
        }
    }
}

impl fmt::Display for AgeRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.exponent == 0.0 {
            write!(f, "const:c={}", self.coef)
        } else {
            write!(f, "power:c={},q={}", self.coef, self.exponent)
        }
    }
}

/// `const:c=K`, `power:c=K,q=E`, or a bare number for a constant.
impl FromStr for AgeRate {
    type Err = QueueError;

    fn from_str(input: &str) -> Result<Self, Self::Err> {
        let bad = |detail: String| QueueError::Config(format!("rate `{input}`: {detail}"));
        let s = input.trim();
        if let Ok(c) = s.parse::<f64>() {
            return Ok(Self::constant(c));
        }
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        let (mut c, mut q) = (None, None);
        for item in rest.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            let (k, v) = item.split_once('=').ok_or_else(|| bad(format!("expected key=value, got `{item}`")))?;
            let v: f64 = v.trim().parse().map_err(|_| bad(format!("`{v}` is not a number")))?;
            match k.trim() {
                "c" => c = Some(v),
                "q" => q = Some(v),
                other => return Err(bad(format!("unknown key `{other}`"))),
            }
        }
        let c = c.ok_or_else(|| bad("missing `c`".into()))?;
        match kind {
            "const" if q.is_none() => Ok(Self::constant(c)),
            "power" => Ok(Self::power(c, q.ok_or_else(|| bad("missing `q`".into()))?)),
            _ => Err(bad(format!("unknown form `{kind}` (const, power)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AgingConfig {
    pub p: AgeRate,
    pub mu: AgeRate,
    /// Inflow density on `[a_min, cutoff)`.
    pub inflow_rate: f64,
    pub cutoff: f64,
    pub a_min: f64,
    pub a_max: f64,
    pub da: f64,
}

impl AgingConfig {
    /// Grid from `T/10` to `a_max` in steps of `T/200`. The grid cannot
    /// start at zero when `p` vanishes there.
    pub fn new(p: AgeRate, mu: AgeRate, inflow_rate: f64, cutoff: f64, a_max: f64) -> Result<Self, QueueError> {
        Self { p, mu, inflow_rate, cutoff, a_min: cutoff / 10.0, a_max, da: cutoff / 200.0 }.with_grid(cutoff / 10.0, cutoff / 200.0)
    }

    pub fn with_grid(self, a_min: f64, da: f64) -> Result<Self, QueueError> {
        let c = Self { a_min, da, ..self };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), QueueError> {
        let bad = |s: String| Err(QueueError::Config(s));
        if !(self.da > 0.0 && self.a_min >= 0.0 && self.a_max > self.a_min + self.da) {
            return bad(format!("grid needs da > 0 and a_max > a_min + da (a_min {}, a_max {}, da {})", self.a_min, self.a_max, self.da));
        }
        if !(self.cutoff > self.a_min && self.cutoff < self.a_max) {
            return bad(format!("cutoff T = {} must lie inside the grid", self.cutoff));
        }
        if !(self.inflow_rate >= 0.0) {
            return bad(format!("inflow rate must be nonnegative, got {}", self.inflow_rate));
        }
        let grid = self.grid();
        if let Some(a) = grid.iter().find(|&&a| !(self.p.eval(a) > 0.0)) {
            return bad(format!("aging rate p must be positive on the grid, p({a}) = {}", self.p.eval(*a)));
        }
        if let Some(a) = grid.iter().find(|&&a| !(self.mu.eval(a) >= 0.0)) {
            return bad(format!("service rate must be nonnegative, mu({a}) = {}", self.mu.eval(*a)));
        }
        // π decays on the scale p/μ; the first cell must not be coarser than that.
        let scale = self.p.eval(self.a_min) / self.mu.eval(self.a_min);
        if scale < self.da {
            return bad(format!("da = {} does not resolve the decay scale p/mu = {scale} at a_min = {}", self.da, self.a_min));
        }
        Ok(())
    }

    pub fn grid(&self) -> Vec<f64> {
        let n = ((self.a_max - self.a_min) / self.da).round() as usize;
        (0..=n).map(|i| self.a_min + i as f64 * self.da).collect()
    }

    pub fn inflow(&self, a: f64) -> f64 {
        if a < self.cutoff {
            self.inflow_rate
        } else {
            0.0
        }
    }

    /// `∫ G_s`.
    pub fn total_inflow(&self) -> f64 {
        self.inflow_rate * (self.cutoff - self.a_min)
    }

    /// Asymptote class from `μ/p = k a^{q-1}`.
    pub fn regime(&self) -> Regime {
        let k = self.mu.coef / self.p.coef;
        let q = 1.0 + self.mu.exponent - self.p.exponent;
        if k <= 0.0 || q < 0.0 || (q == 0.0 && k <= 1.0) {
            Regime::Explosive { k, q }
        } else if q == 0.0 {
            Regime::PowerTail { k }
        } else {
            Regime::StretchedExponential { k, q }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Regime {
    /// `M ~ exp(-k a^q / q)`.
    StretchedExponential { k: f64, q: f64 },
    /// `M ~ a^{-k}`, integrable for `k > 1`.
    PowerTail { k: f64 },
    /// `∫ M μ` diverges; no stationary population.
    Explosive { k: f64, q: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgingProfile {
    pub grid: Vec<f64>,
    pub m: Vec<f64>,
    /// `π(a) = exp(-∫_{a_min}^a μ/p)`.
    pub pi: Vec<f64>,
    pub c: f64,
    /// `Ψ(T)`.
    pub psi: f64,
    pub regime: Regime,
    /// `|∫G - ∫Mμ| / ∫G` by Simpson's rule with the analytic tail beyond
    /// the grid, independent of the trapezoid sums that fix `C`.
    pub balance_residual: f64,
}

impl AgingProfile {
    pub fn value_at(&self, a: f64) -> f64 {
        let da = self.grid[1] - self.grid[0];
        let x = ((a - self.grid[0]) / da).clamp(0.0, (self.grid.len() - 1) as f64);
        let i = (x.floor() as usize).min(self.grid.len() - 2);
        let w = x - i as f64;
        self.m[i] * (1.0 - w) + self.m[i + 1] * w
    }

    /// Log-log slope of `M` over grid points in `[lo, hi]`.
    pub fn tail_fit(&self, lo: f64, hi: f64) -> Result<LineFit, QueueError> {
        let pts: Vec<(f64, f64)> = self.grid.iter().zip(&self.m).filter(|&(&a, &m)| a >= lo && a <= hi && m > 0.0).map(|(&a, &m)| (a, m)).collect();
        Ok(tail::loglog_regression(&pts)?)
    }
}

fn trapezoid(ys: &[f64], h: f64) -> f64 {
    if ys.len() < 2 {
        return 0.0;
    }
    h * (ys.iter().sum::<f64>() - 0.5 * (ys[0] + ys[ys.len() - 1]))
}

fn simpson(ys: &[f64], h: f64) -> f64 {
    let n = ys.len();
    if n < 3 {
        return trapezoid(ys, h);
    }
    // Odd point count for composite Simpson; a trailing interval goes to the trapezoid.
    let m = if n % 2 == 1 { n } else { n - 1 };
    let mut s = ys[0] + ys[m - 1];
    for (i, y) in ys[1..m - 1].iter().enumerate() {
        s += if i % 2 == 0 { 4.0 * y } else { 2.0 * y };
    }
    let mut total = s * h / 3.0;
    if m < n {
        total += 0.5 * h * (ys[n - 2] + ys[n - 1]);
    }
    total
}

/// Stationary profile `M(a) = π(a)[C + ∫ G/(pπ)]` with `C` from the global
/// balance `∫G = ∫Mμ`.
pub fn aging_stationary(config: &AgingConfig) -> Result<AgingProfile, QueueError> {
    config.validate()?;
    let regime = config.regime();
    if let Regime::Explosive { k, q } = regime {
        return Err(QueueError::Explosive { k, q });
    }
    let grid = config.grid();
    let n = grid.len();
    // Cumulative ln(1/π) and ∫ G/(pπ) by trapezoid on a grid refined
    // SUBSTEPS times; the balance integrals use the same refined points.
    let h = config.da / SUBSTEPS as f64;
    let fine: Vec<f64> = (0..=(n - 1) * SUBSTEPS).map(|j| config.a_min + j as f64 * h).collect();
    let ratio = |a: f64| config.mu.eval(a) / config.p.eval(a);
    let mut ln_inv_pi = vec![0.0; fine.len()];
    let mut phi = vec![0.0; fine.len()];
    let mut prev_f = config.inflow(fine[0]) / config.p.eval(fine[0]);
    for j in 1..fine.len() {
        ln_inv_pi[j] = ln_inv_pi[j - 1] + 0.5 * h * (ratio(fine[j - 1]) + ratio(fine[j]));
        let cur_f = config.inflow(fine[j]) / config.p.eval(fine[j]) * ln_inv_pi[j].exp();
        phi[j] = phi[j - 1] + 0.5 * h * (prev_f + cur_f);
        prev_f = cur_f;
    }
    let pi: Vec<f64> = ln_inv_pi.iter().map(|r| (-r).exp()).collect();
    let mu: Vec<f64> = fine.iter().map(|&a| config.mu.eval(a)).collect();
    let mu_pi: Vec<f64> = mu.iter().zip(&pi).map(|(m, p)| m * p).collect();
    let mu_pi_phi: Vec<f64> = mu_pi.iter().zip(&phi).map(|(m, f)| m * f).collect();
    let psi = phi[phi.len() - 1];
    // Past the grid end A (beyond T, so Φ = Ψ there) μπ ∝ a^{e_μ - k} for a
    // power tail; its integral is closed-form and enters the balance for C.
    let a_end = grid[n - 1];
    let beyond = |last: f64| match regime {
        Regime::PowerTail { k } => {
            let e = config.mu.exponent - k;
            if e < -1.0 {
                last * a_end / (-(e + 1.0))
            } else {
                f64::INFINITY
            }
        }
        _ => 0.0,
    };
    let pi_tail = beyond(mu_pi[mu_pi.len() - 1]);
    let c = (config.total_inflow() - trapezoid(&mu_pi_phi, h) - psi * pi_tail) / (trapezoid(&mu_pi, h) + pi_tail);
    let m_fine: Vec<f64> = pi.iter().zip(&phi).map(|(p, f)| p * (c + f)).collect();

    let mu_m: Vec<f64> = mu.iter().zip(&m_fine).map(|(a, b)| a * b).collect();
    let out = simpson(&mu_m, h) + beyond(mu_m[mu_m.len() - 1]);
    let balance_residual = (config.total_inflow() - out).abs() / config.total_inflow();
    let nodes = |v: &[f64]| v.iter().step_by(SUBSTEPS).copied().collect::<Vec<f64>>();
    let (m, pi) = (nodes(&m_fine), nodes(&pi));
    Ok(AgingProfile { grid, m, pi, c, psi, regime, balance_residual })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgingTrajectory {
    pub grid: Vec<f64>,
    pub times: Vec<f64>,
    pub profiles: Vec<Vec<f64>>,
}

impl AgingTrajectory {
    pub fn last(&self) -> &[f64] {
        self.profiles.last().expect("at least the initial profile")
    }
}

/// First-order upwind evolution with explicit reaction and source terms.
/// `inlet` fixes `M(a_min, t)`; a profile is kept every `record_every`
/// steps and at the end.
pub fn aging_evolve(
    config: &AgingConfig,
    initial: impl Fn(f64) -> f64,
    inlet: f64,
    dt: f64,
    t_end: f64,
    record_every: usize,
) -> Result<AgingTrajectory, QueueError> {
    config.validate()?;
    let grid = config.grid();
    let n = grid.len();
    let p: Vec<f64> = grid.iter().map(|&a| config.p.eval(a)).collect();
    let mu: Vec<f64> = grid.iter().map(|&a| config.mu.eval(a)).collect();
    let g: Vec<f64> = grid.iter().map(|&a| config.inflow(a)).collect();
    let p_max = p.iter().cloned().fold(0.0, f64::max);
    let mu_max = mu.iter().cloned().fold(0.0, f64::max);
    let courant = dt * p_max / config.da;
    if !(dt > 0.0) || courant > 1.0 || dt * mu_max > 1.0 {
        return Err(QueueError::Config(format!(
            "time step {dt} violates stability: dt max p / da = {courant:.4}, dt max mu = {:.4} (both must be <= 1)",
            dt * mu_max
        )));
    }
    let steps = (t_end / dt).round() as usize;
    let every = record_every.max(1);
    let mut cur: Vec<f64> = grid.iter().map(|&a| initial(a)).collect();
    cur[0] = inlet;
    let mut next = cur.clone();
    let mut out = AgingTrajectory { grid, times: vec![0.0], profiles: vec![cur.clone()] };
    for step in 1..=steps {
        next[0] = inlet;
        for i in 1..n {
            next[i] = cur[i] - dt * p[i] * (cur[i] - cur[i - 1]) / config.da - dt * mu[i] * cur[i] + dt * g[i];
        }
        std::mem::swap(&mut cur, &mut next);
        if step % every == 0 || step == steps {
            out.times.push(step as f64 * dt);
            out.profiles.push(cur.clone());
        }
    }
    Ok(out)
}

/// `Σ|a - b| / Σ|b|` over a common grid.
pub fn relative_l1(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum();
    let den: f64 = b.iter().map(|y| y.abs()).sum();
    num / den
}
