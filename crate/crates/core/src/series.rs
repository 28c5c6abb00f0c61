//! Truncated formal power series `c_0 + c_1 s + ... + c_N s^N`.
//!
//! Coefficients are generic over [`num_traits::Num`], so the same code runs in
//! `f64` for long series and in [`BigRational`] when results must be exact.
//! Binary operations between series of different orders truncate to the
//! smaller order.

use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Num, ToPrimitive};
use thiserror::Error;

pub const DEFAULT_ORDER: usize = 128;

pub type ExactSeries = PowerSeries<BigRational>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SeriesError {
    #[error("reciprocal of a series with zero constant term")]
    Singular,
    #[error("composition needs an inner series with zero constant term")]
    NonzeroInnerConstant,
    #[error("coefficient {index} requested from a series of order {order}")]
    OutOfRange { index: usize, order: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerSeries<T> {
    coeffs: Vec<T>,
}

/// `k` as an element of `T`, by repeated addition; fine for the small
/// integers series code needs.
pub fn from_count<T: Num + Clone>(k: usize) -> T {
    let mut acc = T::zero();
    for _ in 0..k {
        acc = acc + T::one();
    }
    acc
}

impl<T: Num + Clone> PowerSeries<T> {
    /// Series of the given order from a coefficient prefix; missing
    /// coefficients are zero and surplus ones are dropped.
    pub fn new(mut coeffs: Vec<T>, order: usize) -> Self {
        coeffs.resize(order + 1, T::zero());
        Self { coeffs }
    }

    pub fn zero(order: usize) -> Self {
        Self::new(Vec::new(), order)
    }

    pub fn constant(c: T, order: usize) -> Self {
        Self::new(vec![c], order)
    }

    pub fn one(order: usize) -> Self {
        Self::constant(T::one(), order)
    }

    /// The series `s`.
    pub fn variable(order: usize) -> Self {
        Self::new(vec![T::zero(), T::one()], order)
    }

    pub fn from_fn(order: usize, f: impl FnMut(usize) -> T) -> Self {
        Self { coeffs: (0..=order).map(f).collect() }
    }

    /// `Σ_{k≥1} x^k s^k / k`, i.e. `-ln(1 - x s)`.
    pub fn neg_log_one_minus(x: T, order: usize) -> Self {
        let mut pow = T::one();
        Self::from_fn(order, |k| {
            if k == 0 {
                return T::zero();
            }
            pow = pow.clone() * x.clone();
            pow.clone() / from_count(k)
        })
    }

    /// `Σ_k x^k s^k`, i.e. `1 / (1 - x s)`.
    pub fn geometric(x: T, order: usize) -> Self {
        let mut pow = T::one();
        Self::from_fn(order, |k| {
            if k > 0 {
                pow = pow.clone() * x.clone();
            }
            pow.clone()
        })
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn coeff(&self, k: usize) -> Result<&T, SeriesError> {
        self.coeffs.get(k).ok_or(SeriesError::OutOfRange { index: k, order: self.order() })
    }

    pub fn truncate(&self, order: usize) -> Self {
        Self::new(self.coeffs[..=order.min(self.order())].to_vec(), order)
    }

    pub fn scale(&self, c: &T) -> Self {
        Self { coeffs: self.coeffs.iter().map(|a| a.clone() * c.clone()).collect() }
    }

    /// Multiplies by `s^k`, dropping terms past the order.
    pub fn shift(&self, k: usize) -> Self {
        let n = self.order();
        Self::from_fn(n, |i| if i < k { T::zero() } else { self.coeffs[i - k].clone() })
    }

    pub fn recip(&self) -> Result<Self, SeriesError> {
        let a0 = &self.coeffs[0];
        if a0.is_zero() {
            return Err(SeriesError::Singular);
        }
        let inv0 = T::one() / a0.clone();
        let n = self.order();
        let mut out: Vec<T> = Vec::with_capacity(n + 1);
        out.push(inv0.clone());
        for k in 1..=n {
            let mut acc = T::zero();
            for j in 1..=k {
                let a = &self.coeffs[j];
                if !a.is_zero() {
                    acc = acc + a.clone() * out[k - j].clone();
                }
            }
            out.push(T::zero() - acc * inv0.clone());
        }
        Ok(Self { coeffs: out })
    }

    /// `self(inner(s))`, defined when `inner` has no constant term.
    pub fn compose(&self, inner: &Self) -> Result<Self, SeriesError> {
        if !inner.coeffs[0].is_zero() {
            return Err(SeriesError::NonzeroInnerConstant);
        }
        let n = self.order().min(inner.order());
        let inner = inner.truncate(n);
        let mut acc = Self::constant(self.coeffs[n].clone(), n);
        for k in (0..n).rev() {
            acc = &acc * &inner;
            acc.coeffs[0] = acc.coeffs[0].clone() + self.coeffs[k].clone();
        }
        Ok(acc)
    }

    /// Evaluates the truncated polynomial at `x`.
    pub fn eval(&self, x: &T) -> T {
        self.coeffs.iter().rev().fold(T::zero(), |acc, c| acc * x.clone() + c.clone())
    }

    pub fn map<U: Num + Clone>(&self, f: impl Fn(&T) -> U) -> PowerSeries<U> {
        PowerSeries { coeffs: self.coeffs.iter().map(f).collect() }
    }
}

impl ExactSeries {
    pub fn to_f64(&self) -> PowerSeries<f64> {
        self.map(|c| c.to_f64().unwrap_or(f64::NAN))
    }
}

/// Exact rational with the same value as the given float.
pub fn exact(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite float")
}

/// `num / den` as an exact rational.
pub fn ratio(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

impl<T: Num + Clone> Add for &PowerSeries<T> {
    type Output = PowerSeries<T>;
    fn add(self, rhs: Self) -> PowerSeries<T> {
        let n = self.order().min(rhs.order());
        PowerSeries::from_fn(n, |k| self.coeffs[k].clone() + rhs.coeffs[k].clone())
    }
}

impl<T: Num + Clone> Sub for &PowerSeries<T> {
    type Output = PowerSeries<T>;
    fn sub(self, rhs: Self) -> PowerSeries<T> {
        let n = self.order().min(rhs.order());
        PowerSeries::from_fn(n, |k| self.coeffs[k].clone() - rhs.coeffs[k].clone())
    }
}

impl<T: Num + Clone> Neg for &PowerSeries<T> {
    type Output = PowerSeries<T>;
    fn neg(self) -> PowerSeries<T> {
        PowerSeries { coeffs: self.coeffs.iter().map(|c| T::zero() - c.clone()).collect() }
    }
}

impl<T: Num + Clone> Mul for &PowerSeries<T> {
    type Output = PowerSeries<T>;
    fn mul(self, rhs: Self) -> PowerSeries<T> {
        let n = self.order().min(rhs.order());
        let mut out = vec![T::zero(); n + 1];
        for (i, a) in self.coeffs[..=n].iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in rhs.coeffs[..=n - i].iter().enumerate() {
                out[i + j] = out[i + j].clone() + a.clone() * b.clone();
            }
        }
        PowerSeries { coeffs: out }
    }
}

macro_rules! forward_owned {
    ($($tr:ident $m:ident),*) => {$(
        impl<T: Num + Clone> $tr for PowerSeries<T> {
            type Output = PowerSeries<T>;
            fn $m(self, rhs: Self) -> PowerSeries<T> {
                (&self).$m(&rhs)
            }
        }
    )*};
}
forward_owned!(Add add, Sub sub, Mul mul);
