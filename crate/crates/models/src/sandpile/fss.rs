//! Finite-size scaling: `P(x, L) = x^{-τ} F(x / L^σ)`.

use serde::Serialize;
use tailsim_core::tail::{self, TailError};
use tailsim_core::EmpiricalDistribution;

use super::SandpileError;

/// Samples of one observable at one lattice size.
#[derive(Debug, Clone, PartialEq)]
pub struct FssSample {
    pub side: usize,
    pub values: Vec<f64>,
}

/// How the cutoff scale `x_c(L) ∝ L^σ` is read off a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum CutoffScale {
    /// `⟨x²⟩/⟨x⟩`, proportional to `L^σ` for `1 < τ < 2`.
    MomentRatio,
    /// A fixed upper quantile. Biased low when `τ < 2`, since the mass
    /// near the cutoff shrinks as `L` grows.
    Quantile { p: f64 },
}

impl CutoffScale {
    pub fn of(&self, emp: &EmpiricalDistribution) -> f64 {
        match *self {
            CutoffScale::MomentRatio => emp.moment(2) / emp.moment(1),
            CutoffScale::Quantile { p } => emp.quantile(p),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FssOptions {
    pub x_min: f64,
    pub cutoff: CutoffScale,
    /// Scaling window is `[x_min, cutoff / window_ratio]`.
    pub window_ratio: f64,
    /// Integer-valued data: the likelihood normalizes by a sum over integers.
    pub discrete: bool,
}

impl FssOptions {
    pub fn continuous(x_min: f64) -> Self {
        Self { x_min, cutoff: CutoffScale::MomentRatio, window_ratio: 10.0, discrete: false }
    }

    pub fn discrete(x_min: f64) -> Self {
        Self { discrete: true, ..Self::continuous(x_min) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FssFit {
    pub tau: f64,
    pub tau_stderr: f64,
    pub sigma: f64,
    pub sigma_stderr: f64,
    /// Sup distance between the rescaled CCDFs; smaller is better.
    pub collapse: f64,
    /// Some scaling window spans less than a decade, or only two sizes.
    pub low_confidence: bool,
    /// `(L, x_c(L))`.
    pub cutoffs: Vec<(usize, f64)>,
    /// Points used by the likelihood.
    pub window_points: usize,
}

/// Sufficient statistics of one scaling window.
struct Window {
    lo: f64,
    hi: f64,
    n: f64,
    discrete: bool,
}

impl Window {
    /// Mean and variance of `ln x` under `x^{-τ}` on the window.
    fn log_moments(&self, tau: f64) -> (f64, f64) {
        if self.discrete {
            let (lo, hi) = (self.lo.ceil() as u64, self.hi.floor() as u64);
            let (mut z, mut m1, mut m2) = (0.0, 0.0, 0.0);
            for k in lo..=hi {
                let l = (k as f64).ln();
                let w = (-tau * l).exp();
                z += w;
                m1 += w * l;
                m2 += w * l * l;
            }
            let mean = m1 / z;
            return (mean, (m2 / z - mean * mean).max(0.0));
        }
        // u = ln x has density ∝ e^{-λu} on [0, D] with λ = τ - 1.
        let d = (self.hi / self.lo).ln();
        let lam = tau - 1.0;
        let (mean, var) = if (lam * d).abs() < 1e-6 {
            (d / 2.0, d * d / 12.0)
        } else {
            let e = (lam * d).exp_m1();
            (1.0 / lam - d / e, 1.0 / (lam * lam) - d * d * (e + 1.0) / (e * e))
        };
        (self.lo.ln() + mean, var)
    }
}

/// Fits `(τ, σ)` across lattice sizes. `σ` is the log-log slope of the
/// cutoff scale against `L`; `τ` maximizes the pooled likelihood of a pure
/// power law on each size's window `[x_min, x_c / window_ratio]`.
pub fn fss_fit(samples: &[FssSample], options: &FssOptions) -> Result<FssFit, SandpileError> {
    if samples.len() < 2 {
        return Err(SandpileError::Config(format!("need at least two lattice sizes, got {}", samples.len())));
    }
    let mut emps = Vec::with_capacity(samples.len());
    for s in samples {
        let kept: Vec<f64> = s.values.iter().copied().filter(|&x| x >= options.x_min).collect();
        let got = kept.len();
        let emp = EmpiricalDistribution::new(kept).map_err(|_| TailError::InsufficientData { got, needed: 1 })?;
        emps.push((s.side, emp));
    }
    let cutoffs: Vec<(usize, f64)> = emps.iter().map(|(l, e)| (*l, options.cutoff.of(e))).collect();
    let (lx, ly): (Vec<f64>, Vec<f64>) = cutoffs.iter().map(|&(l, c)| ((l as f64).ln(), c.ln())).unzip();
    let sig = tail::linear_fit(&lx, &ly)?;

    let mut windows = Vec::new();
    let mut sum_log = 0.0;
    let mut short_window = false;
    for ((_, emp), &(_, cut)) in emps.iter().zip(&cutoffs) {
        let hi = cut / options.window_ratio;
        short_window |= hi < 10.0 * options.x_min;
        if hi <= options.x_min {
            continue;
        }
        let inside: Vec<f64> = emp.samples().iter().copied().filter(|&x| x <= hi).collect();
        if inside.is_empty() {
            continue;
        }
        sum_log += inside.iter().map(|x| x.ln()).sum::<f64>();
        windows.push(Window { lo: options.x_min, hi, n: inside.len() as f64, discrete: options.discrete });
    }
    let points: f64 = windows.iter().map(|w| w.n).sum();
    if points < 2.0 {
        return Err(TailError::InsufficientData { got: points as usize, needed: 2 }.into());
    }
    // The score Σ n_L E_τ[ln x] - Σ ln x is decreasing in τ.
    let score = |tau: f64| windows.iter().map(|w| w.n * w.log_moments(tau).0).sum::<f64>() - sum_log;
    let (mut lo, mut hi) = (-10.0, 10.0);
    if score(lo) < 0.0 || score(hi) > 0.0 {
        return Err(SandpileError::Config("power-law likelihood has no maximum in τ ∈ [-10, 10]".into()));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if score(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let tau = 0.5 * (lo + hi);
    let info: f64 = windows.iter().map(|w| w.n * w.log_moments(tau).1).sum();
    let collapse = collapse_distance(&emps, tau, sig.slope, options.x_min);
    Ok(FssFit {
        tau,
        tau_stderr: 1.0 / info.sqrt(),
        sigma: sig.slope,
        sigma_stderr: sig.slope_stderr,
        collapse,
        low_confidence: short_window || samples.len() < 3,
        cutoffs,
        window_points: points as usize,
    })
}

/// Sup over a shared grid of `y = x / L^σ` of the spread between the
/// curves `x^{τ-1} Pr(X > x)`, which coincide under a perfect collapse.
pub fn collapse_distance(emps: &[(usize, EmpiricalDistribution)], tau: f64, sigma: f64, x_min: f64) -> f64 {
    // Each curve is trusted from x_min up to where ten samples remain.
    let ranges: Vec<(f64, f64)> = emps
        .iter()
        .map(|(l, e)| {
            let scale = (*l as f64).powf(sigma);
            let top = e.quantile(1.0 - 10.0 / e.count() as f64);
            (x_min / scale, top / scale)
        })
        .collect();
    let y_lo = ranges.iter().map(|r| r.0).fold(f64::MIN, f64::max);
    let y_hi = ranges.iter().map(|r| r.1).fold(f64::MAX, f64::min);
    if !(y_hi > y_lo) {
        return f64::INFINITY;
    }
    const GRID: usize = 40;
    (0..=GRID)
        .map(|k| y_lo * (y_hi / y_lo).powf(k as f64 / GRID as f64))
        .map(|y| {
            let hs = emps.iter().map(|(l, e)| {
                let x = y * (*l as f64).powf(sigma);
                x.powf(tau - 1.0) * e.ccdf(x)
            });
            let (min, max) = hs.fold((f64::MAX, f64::MIN), |(a, b), h| (a.min(h), b.max(h)));
            max - min
        })
        .fold(0.0, f64::max)
}
