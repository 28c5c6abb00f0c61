//! Adaptive Gauss–Legendre quadrature.

use std::sync::OnceLock;

use thiserror::Error;

const ORDER: usize = 16;
const MAX_SPLITS: usize = 20_000;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("quadrature did not converge: estimate {estimate}, achieved error {achieved:e} > tolerance {tolerance:e}")]
pub struct QuadError {
    pub estimate: f64,
    pub achieved: f64,
    pub tolerance: f64,
}

fn nodes() -> &'static [(f64, f64); ORDER] {
    static NODES: OnceLock<[(f64, f64); ORDER]> = OnceLock::new();
    NODES.get_or_init(|| {
        let n = ORDER;
        let mut out = [(0.0, 0.0); ORDER];
        for i in 0..n {
            // Newton on P_n starting from the Chebyshev-like guess.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            out[i] = (x, 2.0 / ((1.0 - x * x) * dp * dp));
        }
        out
    })
}

fn gauss<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    nodes().iter().map(|&(x, w)| w * f(mid + half * x)).sum::<f64>() * half
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&other.err)
    }
}

fn panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Panel {
    let m = 0.5 * (a + b);
    let whole = gauss(f, a, b);
    let value = gauss(f, a, m) + gauss(f, m, b);
    Panel { a, b, value, err: (value - whole).abs() }
}

/// Integrates `f` over `[a, b]` to absolute tolerance `tol`.
///
/// Globally adaptive: the panel with the largest error estimate (difference
/// between one 16-point rule and two half-width rules) is bisected until the
/// summed estimate drops below `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64, QuadError> {
    if a == b {
        return Ok(0.0);
    }
    let mut heap = std::collections::BinaryHeap::new();
    heap.push(panel(&f, a, b));
    let mut total_err = heap.peek().map(|p| p.err).unwrap_or(0.0);
    let mut splits = 0;
    while total_err > tol && splits < MAX_SPLITS {
        let Some(worst) = heap.pop() else { break };
        let m = 0.5 * (worst.a + worst.b);
        if !(m > worst.a && m < worst.b) {
            heap.push(worst);
            break;
        }
        let left = panel(&f, worst.a, m);
        let right = panel(&f, m, worst.b);
        total_err += left.err + right.err - worst.err;
        heap.push(left);
        heap.push(right);
        splits += 1;
        if splits % 64 == 0 {
            // Resum to shed accumulated rounding in the running total.
            total_err = heap.iter().map(|p| p.err).sum();
        }
    }
    let estimate: f64 = heap.iter().map(|p| p.value).sum();
    let achieved: f64 = heap.iter().map(|p| p.err).sum();
    if achieved > tol || !estimate.is_finite() {
        return Err(QuadError { estimate, achieved, tolerance: tol });
    }
    Ok(estimate)
}

/// Integrates over `[a, ∞)` through the substitution `x = a + t/(1-t)`.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: F, a: f64, tol: f64) -> Result<f64, QuadError> {
    let g = |t: f64| {
        if t >= 1.0 {
            return 0.0;
        }
        let s = 1.0 - t;
        let v = f(a + t / s) / (s * s);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };
    integrate(g, 0.0, 1.0, tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let v = integrate(|x| x.powi(7) - 3.0 * x * x, 0.0, 2.0, 1e-13).unwrap();
        assert!((v - (32.0 - 8.0)).abs() < 1e-12);
    }

    #[test]
    fn endpoint_singularity() {
        // ∫_0^1 x^{-1/2} = 2
        let v = integrate(|x| x.powf(-0.5), 0.0, 1.0, 1e-10).unwrap();
        assert!((v - 2.0).abs() < 1e-9, "{v}");
    }

    #[test]
    fn semi_infinite() {
        let v = integrate_to_infinity(|x| (-x).exp(), 0.0, 1e-12).unwrap();
        assert!((v - 1.0).abs() < 1e-11);
        let v = integrate_to_infinity(|x| x.powi(-3), 1.0, 1e-12).unwrap();
        assert!((v - 0.5).abs() < 1e-11);
    }

    #[test]
    fn divergent_reports_error() {
        assert!(integrate_to_infinity(|x| 1.0 / (1.0 + x), 0.0, 1e-10).is_err());
    }
}
