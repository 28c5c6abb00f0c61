//! Multiplicative-noise recursion `x(t+1) = b(t) x(t) + f(t)`.

use serde::Serialize;
use tailsim_core::tail::{self, TailError, TailFit};
use tailsim_core::{Distribution, EmpiricalDistribution, Stream};
use thiserror::Error;

/// Magnitude beyond which a trajectory is reported as diverged.
pub const DIVERGENCE_LIMIT: f64 = 1e300;
pub const DEFAULT_BURN_IN: u64 = 10_000;
pub const DEFAULT_STRIDE: u64 = 10;
pub const MIN_TAIL_SAMPLES: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LangevinError {
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("trajectory diverged at step {step} (|x| = {magnitude:e})")]
    Diverged { step: u64, magnitude: f64 },
    #[error("no stationary solution: <b^2> = {b2} >= 1")]
    NoStationarySolution { b2: f64 },
    #[error("need {needed} samples for a tail fit, have {got}")]
    TooFewSamples { got: usize, needed: usize },
    #[error("tail is not power-law like: index grows from {lower:.3} to {upper:.3} across the window")]
    NotPowerLaw { lower: f64, upper: f64 },
    #[error(transparent)]
    Tail(#[from] TailError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LangevinParams {
    pub multiplier: Distribution,
    pub forcing: Distribution,
    pub burn_in: u64,
    pub stride: u64,
    pub x0: f64,
}

impl LangevinParams {
    pub fn new(multiplier: Distribution, forcing: Distribution) -> Result<Self, LangevinError> {
        let p = Self { multiplier, forcing, burn_in: DEFAULT_BURN_IN, stride: DEFAULT_STRIDE, x0: 0.0 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), LangevinError> {
        if self.multiplier.support_bounds().0 < 0.0 {
            return Err(LangevinError::Params(format!("multiplier law {} has negative support", self.multiplier)));
        }
        let m = self.forcing.mean();
        if !(m.abs() <= 1e-9) {
            return Err(LangevinError::Params(format!("forcing law {} has mean {m}, not 0", self.forcing)));
        }
        if self.stride == 0 {
            return Err(LangevinError::Params("stride must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct LangevinRun {
    /// `(t, x(t))` at every recorded step.
    pub trajectory: Vec<(u64, f64)>,
    /// Recorded `x` values as a sorted sample.
    pub samples: EmpiricalDistribution,
    /// `(t, running mean of x²)` over all post-burn-in steps up to `t`,
    /// one entry per recorded step.
    pub second_moment_trace: Vec<(u64, f64)>,
}

impl LangevinRun {
    pub fn final_second_moment(&self) -> f64 {
        self.second_moment_trace.last().map_or(f64::NAN, |&(_, m)| m)
    }
}

/// Iterates the map for `n_steps` from `params.x0`.
pub fn simulate_langevin(params: &LangevinParams, n_steps: u64, stream: Stream) -> Result<LangevinRun, LangevinError> {
    simulate_langevin_mapped(params, n_steps, stream, |f| f)
}

/// As [`simulate_langevin`] with every forcing draw passed through `map`.
/// The multiplier and forcing draws come from separate substreams, so two
/// runs with different maps see the same underlying randomness.
pub fn simulate_langevin_mapped(params: &LangevinParams, n_steps: u64, stream: Stream, map: impl Fn(f64) -> f64) -> Result<LangevinRun, LangevinError> {
    params.validate()?;
    if n_steps <= params.burn_in {
        return Err(LangevinError::Params(format!("n_steps {n_steps} must exceed burn-in {}", params.burn_in)));
    }
    let mut b_rng = stream.named("multiplier").rng();
    let mut f_rng = stream.named("forcing").rng();
    let recorded = ((n_steps - params.burn_in) / params.stride) as usize;
    let mut trajectory = Vec::with_capacity(recorded);
    let mut trace = Vec::with_capacity(recorded);
    let mut x = params.x0;
    let mut sum_sq = 0.0;
    for t in 1..=n_steps {
        let b = params.multiplier.sample(&mut b_rng);
        let f = map(params.forcing.sample(&mut f_rng));
        x = b * x + f;
        if !(x.abs() <= DIVERGENCE_LIMIT) {
            return Err(LangevinError::Diverged { step: t, magnitude: x.abs() });
        }
        if t > params.burn_in {
            sum_sq += x * x;
            let k = t - params.burn_in;
            if k.is_multiple_of(params.stride) {
                trajectory.push((t, x));
                trace.push((t, sum_sq / k as f64));
            }
        }
    }
    let samples =
        EmpiricalDistribution::new(trajectory.iter().map(|&(_, x)| x).collect()).map_err(|e| LangevinError::Params(format!("no recorded samples: {e}")))?;
    Ok(LangevinRun { trajectory, samples, second_moment_trace: trace })
}

/// `⟨x²⟩` of the stationary law, `f2 / (1 - b2)`.
pub fn stationary_second_moment(b2: f64, f2: f64) -> Result<f64, LangevinError> {
    if !(f2 >= 0.0) {
        return Err(LangevinError::Params(format!("<f^2> = {f2} must be nonnegative")));
    }
    if !(b2 < 1.0) {
        return Err(LangevinError::NoStationarySolution { b2 });
    }
    Ok(f2 / (1.0 - b2))
}

/// Tail exponent `β` of `Pr[|x| > X] ~ X^{-β}` from the recorded samples.
///
/// The fit window runs from the 90th percentile of `|x|` to the sample
/// maximum. Fits whose index climbs markedly between the two geometric
/// halves of the window are rejected as light-tailed.
pub fn estimate_tail_beta(samples: &EmpiricalDistribution) -> Result<TailFit, LangevinError> {
    if samples.count() < MIN_TAIL_SAMPLES {
        return Err(LangevinError::TooFewSamples { got: samples.count(), needed: MIN_TAIL_SAMPLES });
    }
    let abs = EmpiricalDistribution::new(samples.samples().iter().map(|x| x.abs()).collect()).expect("nonempty finite sample");
    let xmin = abs.quantile(0.9);
    let xmax = abs.max();
    if !(xmin > 0.0 && xmax > xmin) {
        return Err(TailError::Window(xmin, xmax).into());
    }
    let (lower, upper) = tail::split_window_fits(&abs, xmin, xmax)?;
    if tail::steepens(&lower, &upper, 0.5) {
        return Err(LangevinError::NotPowerLaw { lower: lower.index(), upper: upper.index() });
    }
    let fit = tail::fit_tail_loglog(&abs, xmin, xmax)?;
    Ok(TailFit { exponent: fit.index(), ..fit })
}
