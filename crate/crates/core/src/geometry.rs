//! The symmetry group `G_k = O(N-k) × O(k)`, reduced coordinates, weights and
//! orbit geometry.
//!
//! A `G_k`-invariant function on `ℝ^N` is a function of the reduced point
//! `(t, s) = (|x'|, |x''|)` where `x = (x', x'') ∈ ℝ^{N-k} × ℝ^k`.

use crate::error::{domain, Error, Result};
use crate::quadrature::{gauss_jacobi, gauss_legendre, normalize_breaks, Rule};
use crate::specfun::{sphere_area, unit_ball_volume, N_MAX};
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;
use std::f64::consts::{FRAC_PI_2, PI};

/// The pair `(N, k)` with cached sphere constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetryDim {
    n: usize,
    k: usize,
    outer_area: f64,
    inner_area: f64,
    ball_volume: f64,
}

impl SymmetryDim {
    pub fn new(n: usize, k: usize) -> Result<Self> {
        if !(3..=N_MAX).contains(&n) {
            return domain(format!("N = {n} outside 3..={N_MAX}"));
        }
        if k < 1 || k > n - 1 {
            return domain(format!("k = {k} outside 1..={}", n - 1));
        }
        Ok(Self {
            n,
            k,
            outer_area: sphere_area(n - k),
            inner_area: sphere_area(k),
            ball_volume: unit_ball_volume(n),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Dimension `N - k` of the first factor space.
    pub fn outer_dim(&self) -> usize {
        self.n - self.k
    }

    /// `|S^{N-k-1}|`.
    pub fn outer_area(&self) -> f64 {
        self.outer_area
    }

    /// `|S^{k-1}|`.
    pub fn inner_area(&self) -> f64 {
        self.inner_area
    }

    /// Volume `α_N` of the unit ball in `ℝ^N`.
    pub fn ball_volume(&self) -> f64 {
        self.ball_volume
    }

    /// Density converting `∫_{ℝ^N}` of an invariant integrand into `∫∫ dt ds`.
    pub fn volume_element(&self, pt: ReducedPoint) -> f64 {
        self.outer_area * self.inner_area * pt.t.powi((self.n - self.k - 1) as i32) * pt.s.powi((self.k - 1) as i32)
    }
}

/// Reduced coordinates `(t, s) = (|x^{(N-k)}|, |x^{(k)}|)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedPoint {
    pub t: f64,
    pub s: f64,
}

impl ReducedPoint {
    pub fn new(t: f64, s: f64) -> Self {
        Self { t, s }
    }

    pub fn norm(&self) -> f64 {
        self.t.hypot(self.s)
    }

    /// A representative point of the orbit, `(t, 0, …, 0, s, 0, …, 0)`.
    pub fn representative(&self, dim: SymmetryDim) -> Vec<f64> {
        let mut x = vec![0.0; dim.n()];
        x[0] = self.t;
        x[dim.outer_dim()] = self.s;
        x
    }

    /// Reduced coordinates of an arbitrary point of `ℝ^N`.
    pub fn of(dim: SymmetryDim, x: &[f64]) -> Self {
        let (a, b) = x.split_at(dim.outer_dim());
        Self {
            t: a.iter().map(|v| v * v).sum::<f64>().sqrt(),
            s: b.iter().map(|v| v * v).sum::<f64>().sqrt(),
        }
    }
}

/// `|S^{N-k-1}|·|S^{k-1}|·t^{N-k-1}·s^{k-1}`.
pub fn reduced_volume_element(dim: SymmetryDim, pt: ReducedPoint) -> f64 {
    dim.volume_element(pt)
}

/// Bi-radial table of nonnegative weight values with bilinear interpolation.
/// Outside the table rectangle the weight is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledWeight {
    pub t_nodes: Vec<f64>,
    pub s_nodes: Vec<f64>,
    /// Row-major values, `values[i * s_nodes.len() + j]` at `(t_i, s_j)`.
    pub values: Vec<f64>,
}

impl SampledWeight {
    pub fn new(t_nodes: Vec<f64>, s_nodes: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let table = Self {
            t_nodes,
            s_nodes,
            values,
        };
        table.validate()?;
        Ok(table)
    }

    fn validate(&self) -> Result<()> {
        let increasing = |v: &[f64]| v.len() >= 2 && v.windows(2).all(|w| w[0] < w[1]);
        if !increasing(&self.t_nodes) || !increasing(&self.s_nodes) {
            return domain("sampled weight nodes must be strictly increasing, at least 2 per axis");
        }
        if self.t_nodes[0] < 0.0 || self.s_nodes[0] < 0.0 {
            return domain("sampled weight nodes must be nonnegative");
        }
        if self.values.len() != self.t_nodes.len() * self.s_nodes.len() {
            return domain("sampled weight table has the wrong number of values");
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return domain("sampled weight values must be finite");
        }
        Ok(())
    }

    fn eval(&self, pt: ReducedPoint) -> f64 {
        let (tn, sn) = (&self.t_nodes, &self.s_nodes);
        let inside = |v: f64, nodes: &[f64]| v >= nodes[0] && v <= *nodes.last().unwrap();
        if !inside(pt.t, tn) || !inside(pt.s, sn) {
            return 0.0;
        }
        let cell = |v: f64, nodes: &[f64]| {
            let i = nodes.partition_point(|&x| x <= v).clamp(1, nodes.len() - 1) - 1;
            (i, (v - nodes[i]) / (nodes[i + 1] - nodes[i]))
        };
        let (i, a) = cell(pt.t, tn);
        let (j, b) = cell(pt.s, sn);
        let m = sn.len();
        let v = |ii: usize, jj: usize| self.values[ii * m + jj];
        let value = (1.0 - a) * (1.0 - b) * v(i, j)
            + a * (1.0 - b) * v(i + 1, j)
            + (1.0 - a) * b * v(i, j + 1)
            + a * b * v(i + 1, j + 1);
        value.max(0.0)
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().fold(0.0, |m, &v| m.max(v))
    }
}

/// The weight `Q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightSpec {
    /// `cap · 1[t ≤ a·max{s^{-α}, s^{-β}}]`, with `α ≥ β`.
    PowerLayer {
        alpha: f64,
        beta: f64,
        a: f64,
        cap: f64,
    },
    Sampled(SampledWeight),
}

impl WeightSpec {
    pub fn power_layer(alpha: f64, beta: f64, a: f64, cap: f64) -> Result<Self> {
        let w = WeightSpec::PowerLayer { alpha, beta, a, cap };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            WeightSpec::PowerLayer { alpha, beta, a, cap } => {
                let finite = [alpha, beta, a, cap].iter().all(|v| v.is_finite());
                if !finite || *alpha <= 0.0 || *beta <= 0.0 || *a <= 0.0 || *cap < 0.0 {
                    return domain("power layer needs alpha, beta, a > 0 and cap ≥ 0");
                }
                if alpha < beta {
                    return domain(format!("power layer needs alpha ≥ beta, got {alpha} < {beta}"));
                }
                Ok(())
            }
            WeightSpec::Sampled(table) => table.validate(),
        }
    }

    /// Largest value of the weight.
    pub fn sup(&self) -> f64 {
        match self {
            WeightSpec::PowerLayer { cap, .. } => *cap,
            WeightSpec::Sampled(table) => table.sup(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.sup() == 0.0
    }

    pub fn eval(&self, pt: ReducedPoint) -> f64 {
        match self {
            WeightSpec::PowerLayer { cap, .. } => {
                if pt.t <= self.layer_height(pt.s) {
                    *cap
                } else {
                    0.0
                }
            }
            WeightSpec::Sampled(table) => table.eval(pt),
        }
    }

    /// Height `a·max{s^{-α}, s^{-β}}` of the power layer above `s`
    /// (infinite at `s = 0`); for a sampled table, its `t` extent.
    pub fn layer_height(&self, s: f64) -> f64 {
        match self {
            WeightSpec::PowerLayer { alpha, beta, a, .. } => {
                if s <= 0.0 {
                    f64::INFINITY
                } else if s < 1.0 {
                    a * s.powf(-alpha)
                } else {
                    a * s.powf(-beta)
                }
            }
            WeightSpec::Sampled(table) => *table.t_nodes.last().unwrap(),
        }
    }

    /// The `s` at which the layer height equals `level`.
    pub(crate) fn layer_inverse(&self, level: f64) -> Option<f64> {
        match self {
            WeightSpec::PowerLayer { alpha, beta, a, .. } => {
                if level <= 0.0 {
                    return None;
                }
                Some(if level >= *a {
                    (a / level).powf(1.0 / alpha)
                } else {
                    (a / level).powf(1.0 / beta)
                })
            }
            WeightSpec::Sampled(_) => None,
        }
    }
}

/// Evaluates `Q` at a reduced point.
pub fn weight_eval(w: &WeightSpec, _dim: SymmetryDim, pt: ReducedPoint) -> f64 {
    w.eval(pt)
}

/// Cumulative distribution of `U = 1 - e·η` for `η` uniform on `S^{m-1}`.
fn orbit_cdf(m: usize, w: f64) -> f64 {
    if m == 1 {
        return if w < 0.0 {
            0.0
        } else if w < 2.0 {
            0.5
        } else {
            1.0
        };
    }
    if w <= 0.0 {
        return 0.0;
    }
    if w >= 2.0 {
        return 1.0;
    }
    let x = 0.5 * w;
    match m {
        2 => 2.0 / PI * x.sqrt().asin(),
        3 => x,
        _ => {
            let a = 0.5 * (m as f64 - 1.0);
            beta_reg(a, a, x)
        }
    }
}

/// Fraction of the orbit through `y` that lies in the ball `B_R(x)`.
///
/// With `x = (t e, s f)` and `y = (t'η, s'μ)`,
/// `|x - y|² = (t-t')² + (s-s')² + 2tt'(1 - e·η) + 2ss'(1 - f·μ)`,
/// and the two angular variables are independent with known laws.
#[derive(Debug, Clone)]
pub(crate) struct OrbitBall {
    outer: usize,
    inner: usize,
    /// Cosine nodes and normalized weights for the law of `f·μ` (inner ≥ 2).
    cos_rule: Rule,
}

impl OrbitBall {
    pub(crate) fn new(dim: SymmetryDim, order: usize) -> Self {
        let inner = dim.k();
        let cos_rule = if inner >= 2 {
            let e = 0.5 * (inner as f64 - 3.0);
            let mut rule = gauss_jacobi(order, e, e);
            let total: f64 = rule.weights.iter().sum();
            rule.weights.iter_mut().for_each(|w| *w /= total);
            rule
        } else {
            Rule {
                nodes: vec![],
                weights: vec![],
            }
        };
        Self {
            outer: dim.outer_dim(),
            inner,
            cos_rule,
        }
    }

    pub(crate) fn fraction(&self, x: ReducedPoint, y: ReducedPoint, r2: f64) -> f64 {
        let d0 = (x.t - y.t).powi(2) + (x.s - y.s).powi(2);
        let rem = r2 - d0;
        if rem <= 0.0 {
            return 0.0;
        }
        let c1 = 2.0 * x.t * y.t;
        let c2 = 2.0 * x.s * y.s;
        match (c1 > 0.0, c2 > 0.0) {
            (false, false) => 1.0,
            (false, true) => orbit_cdf(self.inner, rem / c2),
            (true, false) => orbit_cdf(self.outer, rem / c1),
            (true, true) => {
                if self.inner == 1 {
                    0.5 * (orbit_cdf(self.outer, rem / c1) + orbit_cdf(self.outer, (rem - 2.0 * c2) / c1))
                } else if self.outer == 1 {
                    0.5 * (orbit_cdf(self.inner, rem / c2) + orbit_cdf(self.inner, (rem - 2.0 * c1) / c2))
                } else {
                    self.cos_rule
                        .nodes
                        .iter()
                        .zip(&self.cos_rule.weights)
                        .map(|(&c, &w)| w * orbit_cdf(self.outer, (rem - c2 * (1.0 - c)) / c1))
                        .sum()
                }
            }
        }
    }
}

/// `∫_{B_R(x)} Q dy` for a point `x` with reduced coordinates `center`.
///
/// The ball's reduced shadow is the half-disk `(t-t')² + (s-s')² < R²`; every
/// orbit through the shadow contributes its exact fraction inside the ball.
pub fn region_ball_mass(w: &WeightSpec, dim: SymmetryDim, center: ReducedPoint, radius: f64) -> Result<f64> {
    if !(radius > 0.0) || !radius.is_finite() {
        return domain(format!("ball radius must be positive, got {radius}"));
    }
    w.validate()?;
    if w.is_zero() {
        return Ok(0.0);
    }
    let ball = OrbitBall::new(dim, 24);
    let r2 = radius * radius;
    let (t_lo_all, t_hi_all, s_lo_all, s_hi_all) = match w {
        WeightSpec::PowerLayer { .. } => (0.0, f64::INFINITY, 0.0, f64::INFINITY),
        WeightSpec::Sampled(table) => (
            table.t_nodes[0],
            *table.t_nodes.last().unwrap(),
            table.s_nodes[0],
            *table.s_nodes.last().unwrap(),
        ),
    };
    // s' = s + R sin φ
    let phi_lo = if center.s - radius < s_lo_all {
        ((s_lo_all - center.s) / radius).max(-1.0).asin()
    } else {
        -FRAC_PI_2
    };
    let phi_hi = if center.s + radius > s_hi_all {
        ((s_hi_all - center.s) / radius).min(1.0).asin()
    } else {
        FRAC_PI_2
    };
    if phi_hi <= phi_lo {
        return Ok(0.0);
    }
    let mut breaks = vec![phi_lo, phi_hi];
    if (center.s - 1.0).abs() < radius {
        breaks.push(((1.0 - center.s) / radius).asin());
    }
    let n_outer = 8;
    let mut breaks = normalize_breaks(breaks, phi_lo, phi_hi);
    breaks = crate::quadrature::refine_breaks(&breaks, (phi_hi - phi_lo) / n_outer as f64);
    let outer = Rule::composite(&breaks, 12);
    let inner_base = gauss_legendre(12);
    let mut mass = 0.0;
    for (&phi, &wphi) in outer.nodes.iter().zip(&outer.weights) {
        let s1 = center.s + radius * phi.sin();
        let half = radius * phi.cos();
        let ds = radius * phi.cos();
        let t_lo = (center.t - half).max(t_lo_all);
        let t_hi = (center.t + half).min(t_hi_all).min(w.layer_height(s1));
        if t_hi <= t_lo {
            continue;
        }
        let panels = 4;
        let width = (t_hi - t_lo) / panels as f64;
        let mut inner = 0.0;
        for p in 0..panels {
            let a = t_lo + p as f64 * width;
            for (x, wx) in inner_base.nodes.iter().zip(&inner_base.weights) {
                let t1 = a + 0.5 * width * (1.0 + x);
                let y = ReducedPoint::new(t1, s1);
                inner += 0.5 * width * wx * w.eval(y) * dim.volume_element(y) * ball.fraction(center, y, r2);
            }
        }
        mass += wphi * ds * inner;
    }
    Ok(mass)
}

/// Constructive lower bound on the number of pairwise disjoint `R`-balls
/// centered on the orbit of a point with reduced coordinates `pt`.
pub fn orbit_packing_lower_bound(dim: SymmetryDim, pt: ReducedPoint, radius: f64) -> Result<u64> {
    if !(radius > 0.0) {
        return domain(format!("ball radius must be positive, got {radius}"));
    }
    let factor = |sphere_dim: usize, rho: f64| -> u64 {
        if sphere_dim == 0 {
            if rho > radius {
                2
            } else {
                1
            }
        } else {
            let n = (PI * rho / (2.0 * radius)).floor();
            if n >= u64::MAX as f64 {
                u64::MAX
            } else {
                (n as u64).max(1)
            }
        }
    };
    let a = factor(dim.outer_dim() - 1, pt.t);
    let b = factor(dim.k() - 1, pt.s);
    Ok(a.saturating_mul(b))
}

/// Product quadrature on `S^{m-1}`, `m ≤ 3`, with weights summing to one.
fn sphere_rule(m: usize, resolution: usize) -> Vec<(Vec<f64>, f64)> {
    match m {
        1 => vec![(vec![1.0], 0.5), (vec![-1.0], 0.5)],
        2 => {
            let n = 2 * resolution;
            (0..n)
                .map(|i| {
                    let phi = 2.0 * PI * i as f64 / n as f64;
                    (vec![phi.cos(), phi.sin()], 1.0 / n as f64)
                })
                .collect()
        }
        3 => {
            let gl = gauss_legendre(resolution);
            let n = 2 * resolution;
            let mut out = Vec::with_capacity(resolution * n);
            for (&z, &wz) in gl.nodes.iter().zip(&gl.weights) {
                let rho = (1.0 - z * z).sqrt();
                for i in 0..n {
                    let phi = 2.0 * PI * i as f64 / n as f64;
                    out.push((vec![rho * phi.cos(), rho * phi.sin(), z], 0.5 * wz / n as f64));
                }
            }
            out
        }
        _ => unreachable!("sphere rules exist for m ≤ 3 only"),
    }
}

/// Orbit average of `f` over `G_k` at each reduced node.
pub fn haar_symmetrize<F>(f: F, dim: SymmetryDim, nodes: &[ReducedPoint]) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if dim.n() > 4 {
        return Err(Error::UnsupportedScale(format!(
            "orbit averaging by product quadrature is limited to N ≤ 4, got N = {}",
            dim.n()
        )));
    }
    let resolution = 24;
    let outer = sphere_rule(dim.outer_dim(), resolution);
    let inner = sphere_rule(dim.k(), resolution);
    use rayon::prelude::*;
    Ok(nodes
        .par_iter()
        .map(|pt| {
            let mut x = vec![0.0; dim.n()];
            let mut sum = 0.0;
            for (eta, we) in &outer {
                for (mu, wm) in &inner {
                    for (slot, v) in x.iter_mut().zip(eta.iter().chain(mu.iter())) {
                        *slot = *v;
                    }
                    for v in &mut x[..dim.outer_dim()] {
                        *v *= pt.t;
                    }
                    for v in &mut x[dim.outer_dim()..] {
                        *v *= pt.s;
                    }
                    sum += we * wm * f(&x);
                }
            }
            sum
        })
        .collect())
}
