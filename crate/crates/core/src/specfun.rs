//! Bessel and Hankel functions of real argument, the Fourier transform of the
//! sphere measure and the outgoing Helmholtz fundamental solution.
//!
//! Orders are restricted to `ν ∈ {0, 1/2, 1, …, 12}`, which covers every
//! dimension `N ≤ 26`.
//!
//! Evaluation strategy for `x > 0`:
//!
//! * half-integer orders: spherical Bessel closed forms (`sin`, `cos` and the
//!   three-term recurrence), with the power series below `x = n + 1` where the
//!   upward recurrence for `J` loses digits;
//! * integer orders, `x < 25`: Miller's backward recurrence normalized by
//!   `J₀ + 2ΣJ₂ₖ = 1`, the Neumann series for `Y₀` and its derivative for `Y₁`,
//!   then the (stable) upward recurrence for `Y`;
//! * integer orders, `x ≥ 25`: Hankel's asymptotic expansion, summed until
//!   the terms drop below round-off. For `ν ≤ 12` the smallest term at
//!   `x = 25` is far below `1e-16`.

use crate::error::{domain, Result};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Largest representable `2ν`.
pub const MAX_TWICE_NU: u32 = 24;

/// Largest dimension whose Helmholtz kernel order `(N-2)/2` is representable.
pub const N_MAX: usize = 26;

/// Crossover between the recurrence-based evaluation and the Hankel
/// asymptotic expansion for integer orders.
pub const ASYMPTOTIC_CROSSOVER: f64 = 25.0;

/// Below this argument `sphere_ft` uses its two-term Taylor polynomial.
pub const SPHERE_FT_TAYLOR_CUTOFF: f64 = 1e-6;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Bessel order `ν`, stored as `2ν` so half-integers are exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Order {
    twice_nu: u32,
}

impl Order {
    pub fn from_twice(twice_nu: u32) -> Result<Self> {
        if twice_nu > MAX_TWICE_NU {
            return domain(format!(
                "order {}/2 exceeds the supported maximum {}/2",
                twice_nu, MAX_TWICE_NU
            ));
        }
        Ok(Self { twice_nu })
    }

    pub fn integer(n: u32) -> Result<Self> {
        Self::from_twice(2 * n)
    }

    /// The order `(m-2)/2` attached to the sphere `S^{m-1}` in `ℝ^m`.
    pub fn for_dimension(m: usize) -> Result<Self> {
        if m < 2 {
            return domain(format!("no Bessel order for dimension {m}"));
        }
        Self::from_twice((m - 2) as u32)
    }

    pub fn twice(self) -> u32 {
        self.twice_nu
    }

    pub fn value(self) -> f64 {
        self.twice_nu as f64 / 2.0
    }

    pub fn is_half_integer(self) -> bool {
        self.twice_nu % 2 == 1
    }
}

/// `Γ(n/2)` for a positive integer `n`, computed exactly by recurrence.
pub fn gamma_half(twice: u32) -> f64 {
    assert!(twice > 0, "Γ has a pole at 0");
    let (mut value, mut z) = if twice.is_multiple_of(2) {
        (1.0, 2u32)
    } else {
        (PI.sqrt(), 1u32)
    };
    while z < twice {
        value *= z as f64 / 2.0;
        z += 2;
    }
    value
}

/// Surface area `|S^{m-1}| = 2π^{m/2}/Γ(m/2)`; `|S⁰| = 2`.
pub fn sphere_area(m: usize) -> f64 {
    2.0 * PI.powf(m as f64 / 2.0) / gamma_half(m as u32)
}

/// Volume of the unit ball in `ℝ^m`, `α_m = π^{m/2}/Γ(m/2+1)`.
pub fn unit_ball_volume(m: usize) -> f64 {
    PI.powf(m as f64 / 2.0) / gamma_half(m as u32 + 2)
}

fn check_argument(x: f64) -> Result<()> {
    if !x.is_finite() || x < 0.0 {
        return domain(format!("Bessel argument must be finite and ≥ 0, got {x}"));
    }
    Ok(())
}

/// Bessel function of the first kind `J_ν(x)`, `x ≥ 0`.
pub fn bessel_j(nu: Order, x: f64) -> Result<f64> {
    check_argument(x)?;
    Ok(j_raw(nu.twice_nu, x))
}

/// Bessel function of the second kind `Y_ν(x)`, `x > 0`.
pub fn bessel_y(nu: Order, x: f64) -> Result<f64> {
    check_argument(x)?;
    if x == 0.0 {
        return domain("Y_ν is singular at x = 0");
    }
    Ok(jy_raw(nu.twice_nu, x).1)
}

/// Hankel function of the first kind `H^{(1)}_ν(x) = J_ν(x) + i Y_ν(x)`.
pub fn hankel1(nu: Order, x: f64) -> Result<Complex64> {
    check_argument(x)?;
    if x == 0.0 {
        return domain("H^(1)_ν is singular at x = 0");
    }
    let (j, y) = jy_raw(nu.twice_nu, x);
    Ok(Complex64::new(j, y))
}

/// Fourier transform of the surface measure of `S^{m-1}`:
/// `(2π)^{-m/2} ∫ e^{i r ω·e} dσ(ω) = r^{-(m-2)/2} J_{(m-2)/2}(r)`.
///
/// Even in `r`; `m = 1` is the two-point sphere `{±1}`.
pub fn sphere_ft(m: usize, r: f64) -> Result<f64> {
    if m == 0 || m > N_MAX {
        return domain(format!("sphere dimension m = {m} outside 1..={N_MAX}"));
    }
    if !r.is_finite() {
        return domain(format!("sphere_ft argument must be finite, got {r}"));
    }
    Ok(sphere_ft_unchecked(m, r))
}

/// `sphere_ft` without argument validation; `1 ≤ m ≤ N_MAX`.
pub(crate) fn sphere_ft_unchecked(m: usize, r: f64) -> f64 {
    let r = r.abs();
    if m == 1 {
        return (2.0 / PI).sqrt() * r.cos();
    }
    let twice = (m - 2) as u32;
    let nu = twice as f64 / 2.0;
    if r < SPHERE_FT_TAYLOR_CUTOFF {
        let lead = 0.5f64.powf(nu) / gamma_half(twice + 2);
        return lead * (1.0 - r * r / (4.0 * (nu + 1.0)));
    }
    if r < 2.0 {
        return scaled_series(nu, twice, r);
    }
    j_raw(twice, r) / r.powf(nu)
}

/// Outgoing fundamental solution of `-Δu - u = δ₀` in `ℝ^N`:
/// `Φ(r) = (i/4)(2πr)^{(2-N)/2} H^{(1)}_{(N-2)/2}(r)`.
pub fn helmholtz_kernel(n: usize, r: f64) -> Result<Complex64> {
    if !(3..=N_MAX).contains(&n) {
        return domain(format!("dimension N = {n} outside 3..={N_MAX}"));
    }
    if !r.is_finite() || r <= 0.0 {
        return domain(format!("Φ is singular at the origin; need r > 0, got {r}"));
    }
    let h = hankel1(Order::for_dimension(n)?, r)?;
    let scale = 0.25 * (2.0 * PI * r).powf((2.0 - n as f64) / 2.0);
    Ok(Complex64::new(0.0, scale) * h)
}

// ---------------------------------------------------------------------------
// internals

/// `x^{-ν} J_ν(x)` by its power series.
fn scaled_series(nu: f64, twice: u32, x: f64) -> f64 {
    let y = 0.25 * x * x;
    let mut term = 0.5f64.powf(nu) / gamma_half(twice + 2);
    let mut sum = term;
    for m in 1..400 {
        let mf = m as f64;
        term *= -y / (mf * (mf + nu));
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

fn j_series(twice: u32, x: f64) -> f64 {
    let nu = twice as f64 / 2.0;
    if x == 0.0 {
        return if twice == 0 { 1.0 } else { 0.0 };
    }
    scaled_series(nu, twice, x) * x.powf(nu)
}

pub(crate) fn j_raw(twice: u32, x: f64) -> f64 {
    if x == 0.0 {
        return if twice == 0 { 1.0 } else { 0.0 };
    }
    if twice % 2 == 1 {
        let n = (twice - 1) / 2;
        if x < n as f64 + 1.0 {
            return j_series(twice, x);
        }
        return (2.0 * x / PI).sqrt() * spherical_pair(n, x).0;
    }
    let n = twice / 2;
    if x >= ASYMPTOTIC_CROSSOVER {
        return hankel_asymptotic(n as f64, x).0;
    }
    if x < 1.0 {
        return j_series(twice, x);
    }
    miller(x, n as usize)[n as usize]
}

/// `(J_ν(x), Y_ν(x))` for `x > 0`.
pub(crate) fn jy_raw(twice: u32, x: f64) -> (f64, f64) {
    if twice % 2 == 1 {
        let n = (twice - 1) / 2;
        let (j, y) = spherical_pair(n, x);
        let scale = (2.0 * x / PI).sqrt();
        let j = if x < n as f64 + 1.0 {
            j_series(twice, x)
        } else {
            scale * j
        };
        return (j, scale * y);
    }
    let n = (twice / 2) as usize;
    if x >= ASYMPTOTIC_CROSSOVER {
        return hankel_asymptotic(n as f64, x);
    }
    let js = miller(x, n);
    let (y0, y1) = neumann_y01(x, &js);
    let y = if n == 0 {
        y0
    } else {
        let (mut prev, mut cur) = (y0, y1);
        for m in 1..n {
            let next = 2.0 * m as f64 / x * cur - prev;
            prev = cur;
            cur = next;
        }
        cur
    };
    let j = if x < 1.0 { j_series(twice, x) } else { js[n] };
    (j, y)
}

/// Spherical Bessel `(j_n(x), y_n(x))` by upward recurrence.
fn spherical_pair(n: u32, x: f64) -> (f64, f64) {
    let (s, c) = x.sin_cos();
    let j0 = s / x;
    let y0 = -c / x;
    if n == 0 {
        return (j0, y0);
    }
    let j1 = (j0 - c) / x;
    let y1 = (y0 - s) / x;
    let (mut jp, mut jc, mut yp, mut yc) = (j0, j1, y0, y1);
    for l in 1..n {
        let f = (2 * l + 1) as f64 / x;
        let jn = f * jc - jp;
        let yn = f * yc - yp;
        jp = jc;
        jc = jn;
        yp = yc;
        yc = yn;
    }
    (jc, yc)
}

/// `J_0 … J_M` at `x > 0` by Miller's backward recurrence.
fn miller(x: f64, n_needed: usize) -> Vec<f64> {
    let mut top = (x.max(n_needed as f64) + 40.0).ceil() as usize;
    if top % 2 == 1 {
        top += 1;
    }
    let mut vals = vec![0.0; top + 2];
    vals[top] = 1e-30;
    for j in (1..=top).rev() {
        vals[j - 1] = 2.0 * j as f64 / x * vals[j] - vals[j + 1];
        if vals[j - 1].abs() > 1e250 {
            for v in vals[j - 1..].iter_mut() {
                *v *= 1e-250;
            }
        }
    }
    let norm: f64 = vals[0] + 2.0 * vals.iter().step_by(2).skip(1).sum::<f64>();
    vals.truncate(top + 1);
    for v in vals.iter_mut() {
        *v /= norm;
    }
    vals
}

/// `Y₀` from the Neumann series `Y₀ = (2/π)(ln(x/2)+γ)J₀ − (4/π)Σ(−1)^k J₂ₖ/k`
/// and `Y₁ = −Y₀'` from its term-wise derivative.
fn neumann_y01(x: f64, js: &[f64]) -> (f64, f64) {
    let log_term = (0.5 * x).ln() + EULER_GAMMA;
    let mut sum = 0.0;
    let mut dsum = 0.0;
    let mut k = 1;
    while 2 * k + 1 < js.len() {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign * js[2 * k] / k as f64;
        dsum += sign * 0.5 * (js[2 * k - 1] - js[2 * k + 1]) / k as f64;
        k += 1;
    }
    let y0 = 2.0 / PI * log_term * js[0] - 4.0 / PI * sum;
    let dy0 = 2.0 / PI * (js[0] / x - log_term * js[1]) - 4.0 / PI * dsum;
    (y0, -dy0)
}

/// Hankel's asymptotic expansion, returning `(J_ν(x), Y_ν(x))`.
fn hankel_asymptotic(nu: f64, x: f64) -> (f64, f64) {
    let mu = 4.0 * nu * nu;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term: f64 = 1.0;
    let mut last = f64::INFINITY;
    for k in 1..200usize {
        let odd = (2 * k - 1) as f64;
        term *= (mu - odd * odd) / (8.0 * k as f64 * x);
        // terms first grow while (2k-1)² < 4ν², then shrink until the
        // expansion starts to diverge
        if odd * odd > mu && term.abs() > last {
            break;
        }
        match k % 4 {
            1 => q += term,
            2 => p -= term,
            3 => q -= term,
            _ => p += term,
        }
        if term.abs() < 1e-18 {
            break;
        }
        last = term.abs();
    }
    let chi = x - (0.5 * nu + 0.25) * PI;
    let (s, c) = chi.sin_cos();
    let amp = (2.0 / (PI * x)).sqrt();
    (amp * (p * c - q * s), amp * (p * s + q * c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn ord(twice: u32) -> Order {
        Order::from_twice(twice).unwrap()
    }

    /// Plain power series with exact Γ, used as an oracle for moderate x.
    fn series_oracle(twice: u32, x: f64, terms: usize) -> f64 {
        let nu = twice as f64 / 2.0;
        let mut sum = 0.0;
        for m in 0..terms {
            let mut fact = 1.0;
            for i in 1..=m {
                fact *= i as f64;
            }
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            sum += sign * (0.5 * x).powf(2.0 * m as f64 + nu) / (fact * gamma_half(2 * m as u32 + twice + 2));
        }
        sum
    }

    #[test]
    fn half_order_vanishes_at_pi() {
        assert_abs_diff_eq!(bessel_j(ord(1), PI).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn order_zero_at_origin() {
        assert_eq!(bessel_j(ord(0), 0.0).unwrap(), 1.0);
        assert_eq!(bessel_j(ord(2), 0.0).unwrap(), 0.0);
    }

    #[test]
    fn order_one_at_one_matches_series() {
        let oracle = series_oracle(2, 1.0, 30);
        assert_abs_diff_eq!(oracle, 0.4400505857, epsilon = 1e-10);
        assert_abs_diff_eq!(bessel_j(ord(2), 1.0).unwrap(), oracle, epsilon = 1e-14);
    }

    #[test]
    fn negative_argument_is_rejected() {
        assert!(bessel_j(ord(0), -1.0).is_err());
        assert!(bessel_j(ord(0), f64::NAN).is_err());
        assert!(hankel1(ord(0), 0.0).is_err());
        assert!(Order::from_twice(25).is_err());
    }

    #[test]
    fn hankel_half_order_closed_form() {
        let h = hankel1(ord(1), PI).unwrap();
        assert_abs_diff_eq!(h.re, 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(h.im, 2f64.sqrt() / PI, epsilon = 1e-14);
    }

    #[test]
    fn wronskian_at_one() {
        let x = 1.0;
        let (j1, y1) = jy_raw(2, x);
        let (j2, y2) = jy_raw(4, x);
        // J_{ν+1}Y_ν − J_νY_{ν+1} = 2/(πx)
        assert_abs_diff_eq!(j2 * y1 - j1 * y2, 2.0 / (PI * x), epsilon = 1e-12);
        assert_abs_diff_eq!(y1, -0.781_212_821_300_288_7, epsilon = 1e-13);
    }

    #[test]
    fn hankel_amplitude_at_large_argument() {
        let h = hankel1(ord(0), 100.0).unwrap();
        let lead = (2.0 / (100.0 * PI)).sqrt();
        assert!((h.norm() / lead - 1.0).abs() < 0.01);
    }

    #[test]
    fn reference_values() {
        // J_0(10), Y_0(10), J_5(30), Y_3(2.5)
        assert_abs_diff_eq!(j_raw(0, 10.0), -0.245_935_764_451_348_3, epsilon = 1e-14);
        assert_abs_diff_eq!(jy_raw(0, 10.0).1, 0.055_671_167_283_599_4, epsilon = 1e-14);
        assert_abs_diff_eq!(j_raw(10, 30.0), -0.143_240_295_512_077_06, epsilon = 1e-13);
        assert_abs_diff_eq!(jy_raw(6, 2.5).1, -0.756_055_496_753_671_1, epsilon = 1e-13);
    }

    #[test]
    fn series_and_recurrence_agree_across_crossovers() {
        for twice in 0..=MAX_TWICE_NU {
            for &x in &[0.5, 1.0, 3.0, 7.5, 12.0] {
                let a = j_raw(twice, x);
                let b = series_oracle(twice, x, 80);
                assert_abs_diff_eq!(a, b, epsilon = 1e-11);
            }
        }
    }

    #[test]
    fn asymptotic_matches_miller_at_crossover() {
        for n in 0..=12u32 {
            for &x in &[24.0, 25.0, 26.0] {
                let js = miller(x, n as usize);
                let (ja, ya) = hankel_asymptotic(n as f64, x);
                assert_abs_diff_eq!(js[n as usize], ja, epsilon = 1e-13);
                let (_, yr) = {
                    let (y0, y1) = neumann_y01(x, &js);
                    let (mut prev, mut cur) = (y0, y1);
                    if n == 0 {
                        (0.0, y0)
                    } else {
                        for m in 1..n as usize {
                            let next = 2.0 * m as f64 / x * cur - prev;
                            prev = cur;
                            cur = next;
                        }
                        (0.0, cur)
                    }
                };
                assert_abs_diff_eq!(yr, ya, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn sphere_ft_values() {
        assert_abs_diff_eq!(sphere_ft(2, 0.0).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(
            sphere_ft(2, 3.7).unwrap(),
            bessel_j(ord(0), 3.7).unwrap(),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(sphere_ft(3, PI).unwrap(), 0.0, epsilon = 1e-15);
        for &r in &[1e-8f64, 0.3, 2.0, 17.0] {
            let closed = (2.0 / PI).sqrt() * r.sin() / r;
            assert_abs_diff_eq!(sphere_ft(3, r).unwrap(), closed, epsilon = 1e-14);
        }
        // value at the origin is (2π)^{-m/2}|S^{m-1}|
        for m in 2..=10 {
            let origin = sphere_area(m) / (2.0 * PI).powf(m as f64 / 2.0);
            assert_abs_diff_eq!(sphere_ft(m, 0.0).unwrap(), origin, epsilon = 1e-14);
        }
        assert!(sphere_ft(0, 1.0).is_err());
    }

    #[test]
    fn sphere_ft_taylor_joins_series() {
        for m in 2..=26 {
            let below = sphere_ft(m, SPHERE_FT_TAYLOR_CUTOFF * 0.999).unwrap();
            let above = sphere_ft(m, SPHERE_FT_TAYLOR_CUTOFF * 1.001).unwrap();
            assert!((below - above).abs() < 1e-15 * below.abs().max(1e-300) + 1e-17);
        }
    }

    #[test]
    fn kernel_three_dimensions() {
        let phi = helmholtz_kernel(3, 1.0).unwrap();
        let expected = Complex64::new(1f64.cos(), 1f64.sin()) / (4.0 * PI);
        assert_abs_diff_eq!(phi.re, expected.re, epsilon = 1e-15);
        assert_abs_diff_eq!(phi.im, expected.im, epsilon = 1e-15);
        assert_abs_diff_eq!(phi.re, 0.04300, epsilon = 1e-5);
        assert_abs_diff_eq!(phi.im, 0.06697, epsilon = 1e-5);
        assert!(helmholtz_kernel(3, 0.0).is_err());
        assert!(helmholtz_kernel(2, 1.0).is_err());
    }

    #[test]
    fn kernel_small_argument_four_dimensions() {
        let r = 0.01;
        let lead = gamma_half(2) / (4.0 * PI.powi(2)); // Γ(N/2−1)/(4π^{N/2}), N = 4
        let got = helmholtz_kernel(4, r).unwrap().norm() * r * r;
        assert!((got / lead - 1.0).abs() < 0.02);
    }

    #[test]
    fn geometry_constants() {
        assert_abs_diff_eq!(sphere_area(1), 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(sphere_area(2), 2.0 * PI, epsilon = 1e-14);
        assert_abs_diff_eq!(sphere_area(3), 4.0 * PI, epsilon = 1e-14);
        assert_abs_diff_eq!(unit_ball_volume(3), 4.0 * PI / 3.0, epsilon = 1e-14);
        for m in 1..12 {
            assert_abs_diff_eq!(sphere_area(m), m as f64 * unit_ball_volume(m), epsilon = 1e-12);
        }
    }
}
