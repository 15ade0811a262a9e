//! Explicit exponent thresholds and admissibility regions.
//!
//! Every formula is generic over [`Scalar`], implemented for `f64` and for
//! exact rationals, so breakpoint identities can be checked without
//! round-off.

use crate::error::{domain, Result};
use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Exact rational scalar used for breakpoint checks.
pub type Rational = Ratio<i64>;

mod sealed {
    pub trait Sealed {}
    impl Sealed for f64 {}
    impl Sealed for super::Rational {}
}

/// Field arithmetic shared by `f64` and [`Rational`].
pub trait Scalar:
    sealed::Sealed
    + Copy
    + Debug
    + PartialOrd
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn int(v: i64) -> Self;
    fn to_f64(self) -> f64;
    fn is_finite(self) -> bool;

    fn frac(a: i64, b: i64) -> Self {
        Self::int(a) / Self::int(b)
    }

    fn max_of(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }
}

impl Scalar for f64 {
    fn int(v: i64) -> Self {
        v as f64
    }
    fn to_f64(self) -> f64 {
        self
    }
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
}

impl Scalar for Rational {
    fn int(v: i64) -> Self {
        Ratio::from_integer(v)
    }
    fn to_f64(self) -> f64 {
        *self.numer() as f64 / *self.denom() as f64
    }
    fn is_finite(self) -> bool {
        true
    }
}

/// A threshold value with the side condition of the theorem it comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdResult<T = f64> {
    pub value: T,
    pub valid: bool,
    /// Which side condition failed when `valid` is false.
    pub constraint_violated: Option<String>,
}

impl<T> ThresholdResult<T> {
    fn valid(value: T) -> Self {
        Self {
            value,
            valid: true,
            constraint_violated: None,
        }
    }

    fn flagged(value: T, tag: &str) -> Self {
        Self {
            value,
            valid: false,
            constraint_violated: Some(tag.to_owned()),
        }
    }
}

/// A point `(1/p, 1/r)` of the reflected Riesz diagram.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentPair<T = f64> {
    pub inv_p: T,
    pub inv_r: T,
}

impl<T: Scalar> ExponentPair<T> {
    pub fn new(inv_p: T, inv_r: T) -> Result<Self> {
        let (zero, one) = (T::int(0), T::int(1));
        let inside = |x: T| x.is_finite() && x > zero && x < one;
        if !inside(inv_p) || !inside(inv_r) {
            return domain("exponent pair must lie in (0, 1)²");
        }
        Ok(Self { inv_p, inv_r })
    }

    pub fn diagonal(inv_p: T) -> Result<Self> {
        Self::new(inv_p, inv_p)
    }
}

fn check_dims(n: usize, k: usize) -> Result<(i64, i64)> {
    if n < 3 {
        return domain(format!("N must be at least 3, got {n}"));
    }
    if k < 1 || k >= n {
        return domain(format!("k must lie in 1..={}, got {k}", n - 1));
    }
    Ok((n as i64, k as i64))
}

fn check_positive<T: Scalar>(name: &str, x: T) -> Result<()> {
    if !(x.is_finite() && x > T::int(0)) {
        return domain(format!("{name} must be positive and finite, got {x:?}"));
    }
    Ok(())
}

/// `λ` for the outer-factor constraint: `(2(N-k) - 2k/α)/(N-k-1)`.
fn outer_branch<T: Scalar>(n: i64, k: i64, alpha: T) -> T {
    (T::int(2 * (n - k)) - T::int(2 * k) / alpha) / T::int(n - k - 1)
}

/// `λ` for the inner-factor constraint: `(2k - 2β(N-k))/(k-1)`.
fn inner_branch<T: Scalar>(n: i64, k: i64, beta: T) -> T {
    (T::int(2 * k) - T::int(2 * (n - k)) * beta) / T::int(k - 1)
}

/// Exponent threshold `λ_{N,k,α}` of the weighted extension estimate for
/// the layer `|x^{(N-k)}| ≤ a|x^{(k)}|^{-α}`.
pub fn lambda_threshold<T: Scalar>(n: usize, k: usize, alpha: T) -> Result<ThresholdResult<T>> {
    let (ni, ki) = check_dims(n, k)?;
    check_positive("alpha", alpha)?;
    Ok(if ki == 1 {
        let value = (T::int(2 * (ni - 1)) - T::int(2) / alpha) / T::int(ni - 2);
        if alpha <= T::frac(1, ni - 1) {
            ThresholdResult::flagged(value, "alpha <= 1/(N-1) for k = 1")
        } else {
            ThresholdResult::valid(value)
        }
    } else if ki == ni - 1 {
        let value = (T::int(2 * (ni - 1)) - T::int(2) * alpha) / T::int(ni - 2);
        if alpha >= T::int(ni - 1) {
            ThresholdResult::flagged(value, "alpha >= N-1 for k = N-1")
        } else {
            ThresholdResult::valid(value)
        }
    } else {
        ThresholdResult::valid(outer_branch(ni, ki, alpha).max_of(inner_branch(ni, ki, alpha)))
    })
}

/// Threshold `λ_{N,k,α,β}` for the two-exponent layer
/// `|x^{(N-k)}| ≤ a·max{|x^{(k)}|^{-α}, |x^{(k)}|^{-β}}`, `α ≥ β`.
pub fn lambda_threshold_ab<T: Scalar>(n: usize, k: usize, alpha: T, beta: T) -> Result<ThresholdResult<T>> {
    let (ni, ki) = check_dims(n, k)?;
    check_positive("alpha", alpha)?;
    check_positive("beta", beta)?;
    if beta > alpha {
        return domain("the layer needs alpha >= beta");
    }
    Ok(if ki == 1 {
        let value = (T::int(2 * (ni - 1)) - T::int(2) / alpha) / T::int(ni - 2);
        if beta <= T::frac(1, ni - 1) {
            ThresholdResult::flagged(value, "beta <= 1/(N-1) for k = 1")
        } else {
            ThresholdResult::valid(value)
        }
    } else if ki == ni - 1 {
        let value = (T::int(2 * (ni - 1)) - T::int(2) * beta) / T::int(ni - 2);
        if alpha >= T::int(ni - 1) {
            ThresholdResult::flagged(value, "alpha >= N-1 for k = N-1")
        } else {
            ThresholdResult::valid(value)
        }
    } else {
        ThresholdResult::valid(inner_branch(ni, ki, beta).max_of(outer_branch(ni, ki, alpha)))
    })
}

/// Lower end `μ_{N,k,α}` of the exponent window `(μ, 2N/(N-2))` in which
/// dual bound states exist for weights dominated by the layer.
pub fn mu_threshold<T: Scalar>(n: usize, k: usize, alpha: T) -> Result<ThresholdResult<T>> {
    let (ni, ki) = check_dims(n, k)?;
    check_positive("alpha", alpha)?;
    let two = T::int(2);
    let four_n = T::int(4 * ni);
    let nm1 = T::int(ni - 1);
    let value = if ki == 1 {
        if alpha <= T::frac(1, ni - 1) {
            return domain("k = 1 requires alpha > 1/(N-1)");
        }
        if alpha <= T::frac(ni + 1, 3 * (ni - 1)) {
            two
        } else {
            four_n * (alpha * nm1 - T::int(1)) / (nm1 * (T::int(2 * ni - 3) * alpha - T::int(1)))
        }
    } else if ki == ni - 1 {
        if alpha >= nm1 {
            return domain("k = N-1 requires alpha < N-1");
        }
        if alpha <= T::frac(3 * (ni - 1), ni + 1) {
            four_n * (nm1 - alpha) / (nm1 * (T::int(2 * ni - 3) - alpha))
        } else {
            two
        }
    } else {
        let nk = T::int(ni - ki);
        let kk = T::int(ki);
        if alpha <= T::frac(ni + 2 * ki - 1, (ni + 1) * (ni - ki)) {
            four_n * (kk - alpha * nk) / (nm1 * (T::int(2 * ki - 1) - alpha * nk))
        } else if alpha <= T::frac((ni + 1) * ki, ni - 1 + 2 * (ni - ki)) {
            two
        } else {
            four_n * (alpha * nk - kk) / (nm1 * (two * alpha * nk - alpha - kk))
        }
    };
    Ok(ThresholdResult::valid(value))
}

/// `max{(2N/(N-1))·2λ/(λ+2), 2}`, the exponent window's lower end in terms
/// of an extension threshold `λ`.
pub fn mu_from_lambda<T: Scalar>(n: usize, lambda: T) -> T {
    let ni = n as i64;
    let two = T::int(2);
    (T::frac(2 * ni, ni - 1) * two * lambda / (lambda + two)).max_of(two)
}

/// `2(N+1)/(N-1)`.
pub fn stein_tomas_q<T: Scalar>(n: usize) -> Result<T> {
    if n < 2 {
        return domain(format!("N must be at least 2, got {n}"));
    }
    let ni = n as i64;
    Ok(T::frac(2 * (ni + 1), ni - 1))
}

/// The interval `(lower, upper]` of exponents `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalfOpenInterval<T = f64> {
    pub lower: T,
    pub upper: T,
}

impl<T: Scalar> HalfOpenInterval<T> {
    pub fn contains(&self, p: T) -> bool {
        p > self.lower && p <= self.upper
    }
}

fn check_q<T: Scalar>(n: usize, q: T) -> Result<i64> {
    if n < 3 {
        return domain(format!("N must be at least 3, got {n}"));
    }
    let st = stein_tomas_q::<T>(n)?;
    if !(q.is_finite() && q >= T::int(1) && q <= st) {
        return domain(format!("q must lie in [1, 2(N+1)/(N-1)], got {q:?}"));
    }
    Ok(n as i64)
}

/// Exponents `p ∈ (2N/(N-1)·2q/(q+2), 2N/(N-2)]` of the self-dual resolvent
/// estimate for an admissible exponent `q`.
pub fn selfdual_p_range<T: Scalar>(n: usize, q: T) -> Result<HalfOpenInterval<T>> {
    let ni = check_q(n, q)?;
    Ok(HalfOpenInterval {
        lower: T::frac(2 * ni, ni - 1) * T::int(2) * q / (q + T::int(2)),
        upper: T::frac(2 * ni, ni - 2),
    })
}

/// Whether `(1/p, 1/r)` lies in the admissible trapezoid of the
/// non-self-dual resolvent estimate, with its strict and non-strict edges.
pub fn nonselfdual_admissible<T: Scalar>(n: usize, q: T, pair: ExponentPair<T>) -> Result<bool> {
    let ni = check_q(n, q)?;
    let (x, y) = (pair.inv_p, pair.inv_r);
    let two = T::int(2);
    let sum = x + y;
    // (N-2)/N ≤ 1/p + 1/r < (q+2)/(2q)·(N-1)/N
    let general = sum >= T::frac(ni - 2, ni) && sum < (q + two) / (two * q) * T::frac(ni - 1, ni);
    if !general {
        return Ok(false);
    }
    if q >= two {
        let edge = T::frac(ni - 1, 2 * ni);
        return Ok(x < edge && y < edge);
    }
    let n1 = T::int(ni - 1);
    let shift = n1 * q - T::int(2 * (ni - 3));
    let lower = two * q / (n1 * (two - q)) * x - shift / (T::int(2 * ni) * (two - q));
    let upper = n1 * (two - q) / (two * q) * x + n1 * shift / (T::int(4 * ni) * q);
    Ok(lower < y && y < upper)
}

/// `A_{r,p,q} = (2qN/(q+2))(1/r + 1/p) - (N-1)`; negative values give
/// geometric decay of the dyadic resolvent pieces.
pub fn interpolation_exponent<T: Scalar>(n: usize, q: T, inv_p: T, inv_r: T) -> T {
    let ni = n as i64;
    T::int(2 * ni) * q / (q + T::int(2)) * (inv_r + inv_p) - T::int(ni - 1)
}

/// One row of a threshold sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRow {
    pub alpha: f64,
    pub lambda: f64,
    /// `None` when `α` is outside the window of the existence result.
    pub mu: Option<f64>,
    pub valid: bool,
    pub st_q: f64,
}

/// `λ`, `μ` and the Stein–Tomas exponent over a list of `α`.
pub fn threshold_table(n: usize, k: usize, alphas: &[f64]) -> Result<Vec<ThresholdRow>> {
    check_dims(n, k)?;
    let st_q = stein_tomas_q::<f64>(n)?;
    alphas
        .iter()
        .map(|&alpha| {
            let lambda = lambda_threshold(n, k, alpha)?;
            let mu = mu_threshold(n, k, alpha).ok().map(|m| m.value);
            Ok(ThresholdRow {
                alpha,
                lambda: lambda.value,
                mu,
                valid: lambda.valid,
                st_q,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(a: i64, b: i64) -> Rational {
        Rational::new(a, b)
    }

    #[test]
    fn worked_values() {
        assert_eq!(lambda_threshold(6, 2, r(1, 1)).unwrap().value, r(4, 3));
        assert_eq!(lambda_threshold_ab(5, 2, r(2, 1), r(1, 1)).unwrap().value, r(2, 1));
        assert_eq!(mu_threshold(3, 1, r(1, 1)).unwrap().value, r(3, 1));
        assert_eq!(stein_tomas_q::<Rational>(3).unwrap(), r(4, 1));
    }

    #[test]
    fn flags_and_errors() {
        let low = lambda_threshold(3, 1, 0.5).unwrap();
        assert!(!low.valid);
        assert_eq!(low.constraint_violated.as_deref(), Some("alpha <= 1/(N-1) for k = 1"));
        assert!(mu_threshold(3, 1, 0.5).is_err());
        assert!(lambda_threshold_ab(5, 2, 1.0, 2.0).is_err());
        assert!(lambda_threshold(2, 1, 1.0).is_err());
        assert!(lambda_threshold(4, 4, 1.0).is_err());
        assert!(lambda_threshold(4, 2, 0.0).is_err());
    }
}
