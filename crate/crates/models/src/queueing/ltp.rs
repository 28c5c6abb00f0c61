//! Heavy-traffic lead-time profiles and their comparison with snapshots.

use serde::Serialize;
use tailsim_core::{Distribution, EmpiricalDistribution};

use super::des::{LeadTimeProfile, Policy};
use super::QueueError;

/// Smallest pooled sample accepted by [`snapshot_compare`].
pub const MIN_POOLED: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Frontier {
    /// `F(Q)`, the left edge of the lead-time profile.
    pub value: f64,
    /// Queue length at which the frontier reaches the left support edge of `G`.
    pub q_star: f64,
    pub mean_deadline: f64,
    pub left_edge: f64,
}

impl Frontier {
    /// Tasks enter service already late.
    pub fn late_entry(&self) -> bool {
        self.value < 0.0
    }
}

fn check_deadline_law(g: &Distribution) -> Result<f64, QueueError> {
    if g.support_bounds().0 < 0.0 {
        return Err(QueueError::Config(format!("deadline law {g} must be nonnegative")));
    }
    let mean = g.mean();
    if !mean.is_finite() {
        return Err(QueueError::NoFrontier(format!("deadline law {g} has no finite mean")));
    }
    Ok(mean)
}

fn excess(g: &Distribution, x: f64) -> Result<f64, QueueError> {
    Ok(g.excess_integral(x)?)
}

/// Solves `Q/λ = ∫_F^∞ (1 - G)` for `F`. Below the left support edge `l`
/// the integral is `⟨D⟩ - F`, which gives the late branch directly.
pub fn frontier(g: &Distribution, lambda: f64, q: f64) -> Result<Frontier, QueueError> {
    if !(lambda > 0.0 && q > 0.0) {
        return Err(QueueError::Config(format!("frontier needs lambda > 0 and Q > 0, got {lambda} and {q}")));
    }
    let mean = check_deadline_law(g)?;
    let l = g.support_bounds().0;
    let q_star = lambda * (mean - l);
    let target = q / lambda;
    if q > q_star {
        return Ok(Frontier { value: mean - target, q_star, mean_deadline: mean, left_edge: l });
    }
    let mut lo = l;
    let mut hi = l.max(1.0);
    while excess(g, hi)? > target {
        hi = l + 2.0 * (hi - l).max(1.0);
        if !hi.is_finite() {
            return Err(QueueError::NoFrontier(format!("no frontier for Q = {q}")));
        }
    }
    // The excess integral is strictly decreasing where positive.
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if excess(g, mid)? > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Frontier { value: 0.5 * (lo + hi), q_star, mean_deadline: mean, left_edge: l })
}

/// A lead-time CDF in closed form.
pub trait LeadTimeCdf {
    fn cdf(&self, x: f64) -> f64;
}

/// EDF profile `F(x) = 1 - (λ/Q) ∫_x^∞ (1 - G)` above the frontier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EdfLtp {
    pub deadline: Distribution,
    pub lambda: f64,
    pub q: f64,
    pub frontier: Frontier,
}

impl LeadTimeCdf for EdfLtp {
    fn cdf(&self, x: f64) -> f64 {
        if x < self.frontier.value {
            return 0.0;
        }
        let j = self.deadline.excess_integral(x).unwrap_or(f64::NAN);
        (1.0 - self.lambda / self.q * j).clamp(0.0, 1.0)
    }
}

pub fn analytic_ltp_edf(g: &Distribution, lambda: f64, q: f64) -> Result<EdfLtp, QueueError> {
    let frontier = frontier(g, lambda, q)?;
    Ok(EdfLtp { deadline: *g, lambda, q, frontier })
}

/// FCFS profile: the deadline law convolved with the uniform law on
/// `[-Q/λ, 0]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FcfsLtp {
    pub deadline: Distribution,
    pub lambda: f64,
    pub q: f64,
}

impl FcfsLtp {
    /// Tail density `(λ/Q)[G(x + Q/λ) - G(x)]`, taken as a difference of
    /// survival values so it keeps precision far out.
    pub fn density(&self, x: f64) -> f64 {
        let w = self.q / self.lambda;
        self.lambda / self.q * (self.deadline.survival(x) - self.deadline.survival(x + w))
    }
}

/// `F(x) = 1 - (λ/Q) ∫_x^{x+Q/λ} (1 - G)`.
impl LeadTimeCdf for FcfsLtp {
    fn cdf(&self, x: f64) -> f64 {
        let w = self.q / self.lambda;
        if x + w <= self.deadline.support_bounds().0 {
            return 0.0;
        }
        let e = |y: f64| self.deadline.excess_integral(y).unwrap_or(f64::NAN);
        (1.0 - self.lambda / self.q * (e(x) - e(x + w))).clamp(0.0, 1.0)
    }
}

pub fn analytic_ltp_fcfs(g: &Distribution, lambda: f64, q: f64) -> Result<FcfsLtp, QueueError> {
    if !(lambda > 0.0 && q > 0.0) {
        return Err(QueueError::Config(format!("LTP needs lambda > 0 and Q > 0, got {lambda} and {q}")));
    }
    check_deadline_law(g)?;
    Ok(FcfsLtp { deadline: *g, lambda, q })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SnapshotComparison {
    pub ks: f64,
    pub observations: usize,
    pub snapshots: usize,
    pub q_center: f64,
    /// Pooled lead times, sorted.
    #[serde(skip)]
    pub pooled: Vec<f64>,
}

/// Pools the lead times of snapshots with `Q` in `window` and measures the
/// KS distance to the analytic profile of `policy` at the window's centre.
pub fn snapshot_compare(
    snapshots: &[LeadTimeProfile],
    g: &Distribution,
    lambda: f64,
    window: (usize, usize),
    policy: Policy,
) -> Result<SnapshotComparison, QueueError> {
    let (lo, hi) = window;
    let chosen: Vec<&LeadTimeProfile> = snapshots.iter().filter(|s| (lo..=hi).contains(&s.q) && s.q > 0).collect();
    let pooled: Vec<f64> = chosen.iter().flat_map(|s| s.lead_times.iter().copied()).collect();
    if pooled.len() < MIN_POOLED {
        return Err(QueueError::InsufficientData { got: pooled.len(), needed: MIN_POOLED });
    }
    let q_center = 0.5 * (lo + hi) as f64;
    let emp = EmpiricalDistribution::new(pooled).expect("finite lead times");
    let ks = match policy {
        Policy::Edf => {
            let f = analytic_ltp_edf(g, lambda, q_center)?;
            emp.ks_distance(|x| f.cdf(x))
        }
        Policy::Fcfs | Policy::Ros => {
            let f = analytic_ltp_fcfs(g, lambda, q_center)?;
            emp.ks_distance(|x| f.cdf(x))
        }
    };
    Ok(SnapshotComparison { ks, observations: emp.count(), snapshots: chosen.len(), q_center, pooled: emp.samples().to_vec() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_frontier() {
        let g = Distribution::exponential(1.0).unwrap();
        let f = frontier(&g, 1.0, 0.5).unwrap();
        assert!((f.value - 2f64.ln()).abs() < 1e-12, "{f:?}");
        assert_eq!(f.q_star, 1.0);
        assert_eq!(frontier(&g, 1.0, 2.0).unwrap().value, -1.0);
    }

    #[test]
    fn pareto_frontier() {
        let g = Distribution::pareto(1.0, 3.0).unwrap();
        let f = frontier(&g, 1.0, 0.5).unwrap();
        assert!((f.q_star - 1.0).abs() < 1e-12 && (f.mean_deadline - 2.0).abs() < 1e-12);
        // B (Bλ/(Q(ω-2)))^{1/(ω-2)} = 2
        assert!((f.value - 2.0).abs() < 1e-12, "{f:?}");
        assert!(frontier(&Distribution::pareto(1.0, 1.5).unwrap(), 1.0, 1.0).is_err());
    }

    #[test]
    fn zero_deadline_is_uniform() {
        let g = Distribution::point(0.0).unwrap();
        let f = frontier(&g, 2.0, 3.0).unwrap();
        assert_eq!(f.q_star, 0.0);
        assert_eq!(f.value, -1.5);
        let edf = analytic_ltp_edf(&g, 2.0, 3.0).unwrap();
        let fcfs = analytic_ltp_fcfs(&g, 2.0, 3.0).unwrap();
        for x in [-1.6, -1.5, -1.0, -0.3, 0.0, 0.5] {
            let u = ((x + 1.5) / 1.5f64).clamp(0.0, 1.0);
            assert!((edf.cdf(x) - u).abs() < 1e-12 && (fcfs.cdf(x) - u).abs() < 1e-12, "{x}");
        }
    }

    #[test]
    fn exponential_profiles() {
        let g = Distribution::exponential(1.0).unwrap();
        let edf = analytic_ltp_edf(&g, 1.0, 0.5).unwrap();
        // Continuity at the frontier.
        assert!(edf.cdf(edf.frontier.value).abs() < 1e-12);
        let fcfs = analytic_ltp_fcfs(&g, 1.0, 1.0).unwrap();
        assert!((fcfs.cdf(0.0) - (-1f64).exp()).abs() < 1e-12);
        // Middle branch for F(Q) < 0: 1 - λ(1 - αx)/(αQ).
        let late = analytic_ltp_edf(&g, 1.0, 2.0).unwrap();
        assert!((late.cdf(-0.5) - (1.0 - 1.5 / 2.0)).abs() < 1e-12);
    }

    #[test]
    fn pareto_tail_branch() {
        let g = Distribution::pareto(1.0, 3.0).unwrap();
        let f = analytic_ltp_edf(&g, 1.0, 2.0).unwrap();
        for x in [1.0, 2.0, 10.0] {
            assert!((f.cdf(x) - (1.0 - 0.5 / x)).abs() < 1e-12);
        }
    }
}
