//! Waiting-time tails under random order of service.

use std::f64::consts::PI;

use serde::Serialize;
use statrs::function::gamma::gamma;
use tailsim_core::quad;
use tailsim_core::tail::{self, LineFit, TailError};
use tailsim_core::EmpiricalDistribution;

use super::QueueError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoxmaParams {
    pub rho: f64,
    pub nu: f64,
    /// Mean service time.
    pub beta: f64,
}

impl BoxmaParams {
    pub fn new(rho: f64, nu: f64, beta: f64) -> Result<Self, QueueError> {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(QueueError::Config(format!("rho must lie in (0, 1), got {rho}")));
        }
        if !(beta > 0.0) {
            return Err(QueueError::Config(format!("mean service time must be positive, got {beta}")));
        }
        let m = nu.abs();
        if !(m > 1.0 && m < 2.0) {
            return Err(QueueError::Config(format!("|nu| must lie in (1, 2), got {nu}")));
        }
        Ok(Self { rho, nu, beta })
    }
}

/// `h(ρ, ν) = ∫_0^1 f(u, ρ, ν) du`, with the service tail index taken as
/// `|ν|` so that either sign convention gives an integrable `f`.
pub fn boxma_h(rho: f64, nu: f64) -> Result<f64, QueueError> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(QueueError::Config(format!("rho must lie in (0, 1), got {rho}")));
    }
    let nu = nu.abs();
    let r = rho / (1.0 - rho);
    let e = 1.0 / (1.0 - rho);
    let f = |u: f64| r * (r * u).powf(nu - 1.0) * (1.0 - u).powf(e) + (1.0 + r).powf(nu) * (1.0 - u).powf(e - 1.0);
    Ok(quad::integrate(f, 0.0, 1.0, 1e-12)?)
}

/// `ρ/(1-ρ) · h / (β Γ(2-ν)) · x^{1-ν}`, the regularly varying factor set
/// to one and the proportionality constant left out.
pub fn boxma_tail(x: f64, p: &BoxmaParams) -> Result<f64, QueueError> {
    let h = boxma_h(p.rho, p.nu)?;
    Ok(p.rho / (1.0 - p.rho) * h / (p.beta * gamma(2.0 - p.nu)) * x.powf(1.0 - p.nu))
}

/// Large-`x` form of `Pr(W_ROS > x)` in M/M/1 with unit service rate.
pub fn ros_mm1_tail(x: f64, rho: f64) -> f64 {
    let s = rho.sqrt();
    let c = 2f64.powf(2.0 / 3.0) / 3f64.sqrt() * PI.powf(5.0 / 6.0) * rho.powf(17.0 / 12.0) * (1.0 + s) / (1.0 - s).powi(3) * ((1.0 + s) / (1.0 - s)).exp();
    c * x.powf(-5.0 / 6.0) * (-ros_gamma(rho) * x - ros_delta(rho) * x.cbrt()).exp()
}

pub fn ros_gamma(rho: f64) -> f64 {
    (1.0 / rho.sqrt() - 1.0).powi(2)
}

pub fn ros_delta(rho: f64) -> f64 {
    3.0 * (PI / 2.0).powf(2.0 / 3.0) * rho.powf(-1.0 / 6.0)
}

/// Decay rate `(1-ρ)/β` of the FCFS M/M/1 waiting time.
pub fn fcfs_mm1_rate(rho: f64, beta: f64) -> f64 {
    (1.0 - rho) / beta
}

/// Least-squares fit of `ln Pr(W > x)` against `x` over `[xmin, xmax]`,
/// one point per distinct sample value. The returned slope is the decay
/// rate, i.e. the negated regression slope.
pub fn log_linear_rate(emp: &EmpiricalDistribution, xmin: f64, xmax: f64) -> Result<LineFit, TailError> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = emp.ccdf_points().into_iter().filter(|&(x, c)| x >= xmin && x <= xmax && c > 0.0).map(|(x, c)| (x, c.ln())).unzip();
    if xs.len() < tail::MIN_WINDOW_POINTS {
        return Err(TailError::InsufficientData { got: xs.len(), needed: tail::MIN_WINDOW_POINTS });
    }
    let fit = tail::linear_fit(&xs, &ys)?;
    Ok(LineFit { slope: -fit.slope, ..fit })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn h_is_positive_and_sign_blind() {
        let h = boxma_h(0.9, -1.5).unwrap();
        assert!(h.is_finite() && h > 0.0);
        assert_eq!(h, boxma_h(0.9, 1.5).unwrap());
    }

    #[test]
    fn gamma_at_quarter_load() {
        assert!((ros_gamma(0.25) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn tail_slope() {
        let p = BoxmaParams::new(0.5, -1.5, 1.0).unwrap();
        let (a, b) = (boxma_tail(10.0, &p).unwrap(), boxma_tail(1000.0, &p).unwrap());
        let slope = (b.ln() - a.ln()) / 100f64.ln();
        assert!((slope - 2.5).abs() < 1e-12);
    }
}
