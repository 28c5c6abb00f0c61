//! Tail-exponent estimation from samples.

use serde::Serialize;
use thiserror::Error;

use crate::empirical::EmpiricalDistribution;

/// Largest order statistics left out of log-log regressions.
pub const EXCLUDED_TOP: usize = 3;
pub const MIN_WINDOW_POINTS: usize = 30;
pub const MIN_HILL_K: usize = 10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TailError {
    #[error("insufficient data: {got} usable points, need {needed}")]
    InsufficientData { got: usize, needed: usize },
    #[error("invalid fit window [{0}, {1}]")]
    Window(f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailMethod {
    LoglogRegression,
    Hill,
}

/// Result of a tail fit.
///
/// For [`TailMethod::LoglogRegression`] `exponent` is the signed slope of
/// `log CCDF` against `log x` (negative for a decaying tail); for
/// [`TailMethod::Hill`] it is the positive tail index. [`TailFit::index`]
/// gives the positive index in both cases.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailFit {
    pub exponent: f64,
    pub stderr: f64,
    pub window: (f64, f64),
    pub method: TailMethod,
    pub points: usize,
    /// Coefficient of determination; regression fits only.
    pub r_squared: Option<f64>,
}

impl TailFit {
    pub fn index(&self) -> f64 {
        match self.method {
            TailMethod::LoglogRegression => -self.exponent,
            TailMethod::Hill => self.exponent,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub r_squared: f64,
}

/// Ordinary least squares `y = intercept + slope·x`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LineFit, TailError> {
    let n = xs.len().min(ys.len());
    if n < 2 {
        return Err(TailError::InsufficientData { got: n, needed: 2 });
    }
    let nf = n as f64;
    let mx = xs[..n].iter().sum::<f64>() / nf;
    let my = ys[..n].iter().sum::<f64>() / nf;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs[..n].iter().zip(&ys[..n]) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 {
        return Err(TailError::InsufficientData { got: 1, needed: 2 });
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res = (syy - slope * sxy).max(0.0);
    let slope_stderr = if n > 2 { (ss_res / (nf - 2.0) / sxx).sqrt() } else { 0.0 };
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    Ok(LineFit { slope, intercept, slope_stderr, r_squared })
}

/// Log-log regression through `(x, y)` points with positive coordinates.
pub fn loglog_regression(points: &[(f64, f64)]) -> Result<LineFit, TailError> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = points.iter().filter(|(x, y)| *x > 0.0 && *y > 0.0).map(|(x, y)| (x.ln(), y.ln())).unzip();
    linear_fit(&xs, &ys)
}

/// Least-squares slope of `log CCDF` against `log x` over distinct sample
/// values in `[xmin, xmax]`, leaving out the [`EXCLUDED_TOP`] largest samples.
pub fn fit_tail_loglog(emp: &EmpiricalDistribution, xmin: f64, xmax: f64) -> Result<TailFit, TailError> {
    if !(xmin > 0.0 && xmin < xmax) {
        return Err(TailError::Window(xmin, xmax));
    }
    let samples = emp.samples();
    let cut = samples.len().saturating_sub(EXCLUDED_TOP);
    let in_window = samples[..cut].iter().filter(|&&x| x >= xmin && x <= xmax).count();
    if in_window < MIN_WINDOW_POINTS {
        return Err(TailError::InsufficientData { got: in_window, needed: MIN_WINDOW_POINTS });
    }
    let ceiling = if cut == 0 { f64::NEG_INFINITY } else { samples[cut - 1] };
    let pts: Vec<(f64, f64)> = emp.ccdf_points().into_iter().filter(|&(x, c)| x >= xmin && x <= xmax && x <= ceiling && c > 0.0).collect();
    if pts.len() < 2 {
        return Err(TailError::InsufficientData { got: pts.len(), needed: 2 });
    }
    let line = loglog_regression(&pts)?;
    Ok(TailFit {
        exponent: line.slope,
        stderr: line.slope_stderr,
        window: (xmin, xmax),
        method: TailMethod::LoglogRegression,
        points: pts.len(),
        r_squared: Some(line.r_squared),
    })
}

/// Hill estimator over the `k_top` largest samples, thresholded at the
/// `(k_top + 1)`-th largest.
pub fn hill_estimator(emp: &EmpiricalDistribution, k_top: usize) -> Result<TailFit, TailError> {
    let samples = emp.samples();
    let n = samples.len();
    if k_top < MIN_HILL_K || k_top >= n {
        return Err(TailError::InsufficientData { got: n.saturating_sub(1).min(k_top), needed: MIN_HILL_K.max(k_top + 1) });
    }
    let threshold = samples[n - 1 - k_top];
    if threshold <= 0.0 {
        return Err(TailError::Window(threshold, samples[n - 1]));
    }
    let mean_log = samples[n - k_top..].iter().map(|x| (x / threshold).ln()).sum::<f64>() / k_top as f64;
    let index = 1.0 / mean_log;
    Ok(TailFit {
        exponent: index,
        stderr: index / (k_top as f64).sqrt(),
        window: (threshold, samples[n - 1]),
        method: TailMethod::Hill,
        points: k_top,
        r_squared: None,
    })
}

/// Fits the lower and upper geometric halves of `[xmin, xmax]` separately.
/// A tail index that grows markedly from the lower to the upper half is the
/// signature of a light (faster than power law) tail.
pub fn split_window_fits(emp: &EmpiricalDistribution, xmin: f64, xmax: f64) -> Result<(TailFit, TailFit), TailError> {
    let mid = (xmin * xmax).sqrt();
    Ok((fit_tail_loglog(emp, xmin, mid)?, fit_tail_loglog(emp, mid, xmax)?))
}

/// True when the upper-half index exceeds the lower-half index by more than
/// `rel` relative and by more than three combined standard errors.
pub fn steepens(lower: &TailFit, upper: &TailFit, rel: f64) -> bool {
    let gap = upper.index() - lower.index();
    let se = (lower.stderr.powi(2) + upper.stderr.powi(2)).sqrt();
    gap > rel * lower.index().abs() && gap > 3.0 * se
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_line() {
        let pts: Vec<(f64, f64)> = (0..40).map(|i| 1.2f64.powi(i)).map(|x| (x, x.powf(-2.0))).collect();
        let line = loglog_regression(&pts).unwrap();
        assert!((line.slope + 2.0).abs() < 1e-9);
        assert!((line.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn window_checks() {
        let e = EmpiricalDistribution::new((1..=100).map(f64::from).collect()).unwrap();
        assert!(matches!(fit_tail_loglog(&e, 1000.0, 2000.0), Err(TailError::InsufficientData { .. })));
        assert!(matches!(fit_tail_loglog(&e, 5.0, 2.0), Err(TailError::Window(..))));
        assert!(hill_estimator(&e, 5).is_err());
        assert!(hill_estimator(&e, 10).is_ok());
    }

    #[test]
    fn hill_on_exact_quantiles() {
        // Deterministic Pareto(ω−1 = 2) quantiles at plotting positions.
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|i| (1.0 - (i as f64 + 0.5) / n as f64).powf(-0.5)).collect();
        let e = EmpiricalDistribution::new(xs).unwrap();
        let mut last = f64::INFINITY;
        for k in [100, 1000, 10_000] {
            let err = (hill_estimator(&e, k).unwrap().exponent - 2.0).abs();
            assert!(err < last, "k={k}: {err}");
            last = err;
        }
        assert!(last < 0.01);
    }
}
