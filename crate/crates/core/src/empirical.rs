//! Sorted-sample empirical laws.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EmpiricalError {
    #[error("empirical distribution needs at least one sample")]
    Empty,
    #[error("sample {index} is not finite ({value})")]
    NotFinite { index: usize, value: f64 },
}

/// Immutable sorted sample.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDistribution {
    samples: Vec<f64>,
}

impl EmpiricalDistribution {
    pub fn new(mut samples: Vec<f64>) -> Result<Self, EmpiricalError> {
        if samples.is_empty() {
            return Err(EmpiricalError::Empty);
        }
        if let Some((index, &value)) = samples.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(EmpiricalError::NotFinite { index, value });
        }
        samples.sort_by(f64::total_cmp);
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn count(&self) -> usize {
        self.samples.len()
    }

    pub fn min(&self) -> f64 {
        self.samples[0]
    }

    pub fn max(&self) -> f64 {
        self.samples[self.samples.len() - 1]
    }

    /// Number of samples `<= x`.
    fn rank(&self, x: f64) -> usize {
        self.samples.partition_point(|&s| s <= x)
    }

    /// Right-continuous `#{samples <= x} / n`.
    pub fn cdf(&self, x: f64) -> f64 {
        self.rank(x) as f64 / self.count() as f64
    }

    /// `#{samples > x} / n`.
    pub fn ccdf(&self, x: f64) -> f64 {
        (self.count() - self.rank(x)) as f64 / self.count() as f64
    }

    /// Distinct sample values with the CCDF evaluated at each.
    pub fn ccdf_points(&self) -> Vec<(f64, f64)> {
        let n = self.count() as f64;
        let mut out = Vec::new();
        let mut i = 0;
        while i < self.samples.len() {
            let v = self.samples[i];
            let mut j = i;
            while j < self.samples.len() && self.samples[j] == v {
                j += 1;
            }
            out.push((v, (self.samples.len() - j) as f64 / n));
            i = j;
        }
        out
    }

    /// Lower empirical quantile, `p` clamped to `[0, 1]`.
    pub fn quantile(&self, p: f64) -> f64 {
        let n = self.count();
        let idx = ((p.clamp(0.0, 1.0) * n as f64).ceil() as usize).clamp(1, n) - 1;
        self.samples[idx]
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.count() as f64
    }

    /// Unbiased sample variance; zero for a single sample.
    pub fn variance(&self) -> f64 {
        let n = self.count();
        if n < 2 {
            return 0.0;
        }
        let m = self.mean();
        self.samples.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64
    }

    pub fn moment(&self, k: i32) -> f64 {
        self.samples.iter().map(|x| x.powi(k)).sum::<f64>() / self.count() as f64
    }

    /// Pools two samples.
    pub fn merge(&self, other: &Self) -> Self {
        let mut all = Vec::with_capacity(self.count() + other.count());
        all.extend_from_slice(&self.samples);
        all.extend_from_slice(&other.samples);
        all.sort_by(f64::total_cmp);
        Self { samples: all }
    }

    /// Kolmogorov–Smirnov distance `sup_x |F_n(x) - F(x)|` against a
    /// reference CDF in the left-continuous convention `F(x) = P{X < x}`.
    /// Atoms in the reference are handled by also probing just above each
    /// sample value.
    pub fn ks_distance<F: Fn(f64) -> f64>(&self, cdf: F) -> f64 {
        let n = self.count() as f64;
        let mut worst: f64 = 0.0;
        let mut i = 0;
        while i < self.samples.len() {
            let v = self.samples[i];
            let mut j = i;
            while j < self.samples.len() && self.samples[j] == v {
                j += 1;
            }
            let below = i as f64 / n;
            let at = j as f64 / n;
            worst = worst.max((cdf(v) - below).abs()).max((cdf(v.next_up()) - at).abs());
            i = j;
        }
        worst.min(1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_sample_at_median() {
        let e = EmpiricalDistribution::new(vec![0.5]).unwrap();
        assert!((e.ks_distance(|x| x.clamp(0.0, 1.0)) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn exact_quantiles_are_close() {
        let n = 1000;
        let xs: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let e = EmpiricalDistribution::new(xs).unwrap();
        assert!(e.ks_distance(|x| x.clamp(0.0, 1.0)) <= 1.0 / n as f64);
    }

    #[test]
    fn atoms_in_reference() {
        let e = EmpiricalDistribution::new(vec![1.0; 10]).unwrap();
        let point = |x: f64| f64::from(u8::from(x > 1.0));
        assert!(e.ks_distance(point) < 1e-15);
    }

    #[test]
    fn ccdf_counts_strictly_greater() {
        let e = EmpiricalDistribution::new(vec![3.0, 1.0, 2.0, 2.0]).unwrap();
        assert_eq!(e.ccdf(2.0), 0.25);
        assert_eq!(e.ccdf(1.999), 0.75);
        assert_eq!(e.ccdf_points(), vec![(1.0, 0.75), (2.0, 0.25), (3.0, 0.0)]);
        assert_eq!(e.quantile(0.5), 2.0);
        assert!(EmpiricalDistribution::new(vec![]).is_err());
        assert!(EmpiricalDistribution::new(vec![f64::NAN]).is_err());
    }
}
