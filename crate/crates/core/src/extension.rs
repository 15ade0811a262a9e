//! Fourier extension of `G_k`-invariant sphere data.
//!
//! A `G_k`-invariant function `F` on `S^{N-1}` is determined by its profile
//! `h(r) = F(rη, √(1-r²)μ)`, and its extension reduces to the one-variable
//! integral
//!
//! ```text
//! E(t, s) = ∫₀¹ r^{N-k-1} (1-r²)^{(k-2)/2} h(r) ďσ_{N-k}(rt) ďσ_k(√(1-r²) s) dr.
//! ```
//!
//! Slice integration gives `∫_{S^{N-1}} g = |S^{N-k-1}||S^{k-1}| ∫₀¹ r^{N-k-1}
//! (1-r²)^{(k-2)/2} g dr`, and the two sphere areas are absorbed by the
//! normalization of `ďσ`, so no further constant appears. The integral is
//! computed in the angle `r = sin θ`, which turns the weight into
//! `sin^{N-k-1}θ cos^{k-1}θ` and removes the endpoint singularity at `r = 1`.

use crate::error::{domain, Error, Result};
use crate::geometry::{ReducedPoint, SymmetryDim, WeightSpec};
use crate::quadrature::{gauss_jacobi, gauss_legendre, normalize_breaks, refine_breaks, uniform_breaks, Rule};
use crate::resolvent::{BiRadialField, Side};
use crate::specfun::sphere_ft_unchecked;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

/// Profile `h` of a `G_k`-invariant sphere function, interpolated by
/// monotone cubic Hermite polynomials on interior panels and linearly on the
/// two end panels.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereProfile {
    nodes: Vec<f64>,
    values: Vec<Complex64>,
    slopes: Vec<Complex64>,
}

impl SphereProfile {
    pub fn new(nodes: Vec<f64>, values: Vec<Complex64>) -> Result<Self> {
        if nodes.len() < 2 || nodes.len() != values.len() {
            return domain("a profile needs at least two nodes and one value per node");
        }
        if nodes[0] != 0.0 || *nodes.last().unwrap() != 1.0 {
            return domain("profile nodes must start at 0 and end at 1");
        }
        if nodes.windows(2).any(|w| w[0] >= w[1]) {
            return domain("profile nodes must be strictly increasing");
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return domain("profile values must be finite");
        }
        let slopes = pchip_slopes(&nodes, &values);
        Ok(Self { nodes, values, slopes })
    }

    /// Profile with prescribed node derivatives for the interior panels.
    pub fn hermite(nodes: Vec<f64>, values: Vec<Complex64>, slopes: Vec<Complex64>) -> Result<Self> {
        let mut profile = Self::new(nodes, values)?;
        if slopes.len() != profile.nodes.len() || slopes.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return domain("one finite slope per node is required");
        }
        profile.slopes = slopes;
        Ok(profile)
    }

    pub fn from_real(nodes: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Self::new(nodes, values.into_iter().map(|v| Complex64::new(v, 0.0)).collect())
    }

    pub fn constant(value: f64) -> Self {
        Self::from_real(vec![0.0, 1.0], vec![value, value]).expect("valid constant profile")
    }

    /// Samples `f` at `n + 1` equispaced nodes.
    pub fn from_fn(n: usize, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        let nodes: Vec<f64> = (0..=n.max(1)).map(|i| i as f64 / n.max(1) as f64).collect();
        let values = nodes.iter().map(|&r| f(r)).collect();
        Self::new(nodes, values)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            nodes: self.nodes.clone(),
            values: self.values.iter().map(|v| v * factor).collect(),
            slopes: self.slopes.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn eval(&self, r: f64) -> Complex64 {
        let n = self.nodes.len();
        let r = r.clamp(0.0, 1.0);
        let i = self.nodes.partition_point(|&x| x <= r).clamp(1, n - 1) - 1;
        let (a, b) = (self.nodes[i], self.nodes[i + 1]);
        let h = b - a;
        let x = (r - a) / h;
        if i == 0 || i == n - 2 {
            return self.values[i] * (1.0 - x) + self.values[i + 1] * x;
        }
        let x2 = x * x;
        let x3 = x2 * x;
        self.values[i] * (2.0 * x3 - 3.0 * x2 + 1.0)
            + self.slopes[i] * (h * (x3 - 2.0 * x2 + x))
            + self.values[i + 1] * (3.0 * x2 - 2.0 * x3)
            + self.slopes[i + 1] * (h * (x3 - x2))
    }
}

fn pchip_component(nodes: &[f64], y: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    let mut d = vec![0.0; n];
    if n < 3 {
        return d;
    }
    let h: Vec<f64> = nodes.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
    for i in 1..n - 1 {
        if delta[i - 1] * delta[i] > 0.0 {
            let w1 = 2.0 * h[i] + h[i - 1];
            let w2 = h[i] + 2.0 * h[i - 1];
            d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
        }
    }
    d[0] = delta[0];
    d[n - 1] = delta[n - 2];
    d
}

fn pchip_slopes(nodes: &[f64], values: &[Complex64]) -> Vec<Complex64> {
    let re: Vec<f64> = values.iter().map(|v| v.re).collect();
    let im: Vec<f64> = values.iter().map(|v| v.im).collect();
    pchip_component(nodes, &re)
        .into_iter()
        .zip(pchip_component(nodes, &im))
        .map(|(a, b)| Complex64::new(a, b))
        .collect()
}

/// Thin band `h = 1` on `(1-δ, 1]`, `0` on `[0, 1-δ]`, with a smooth step
/// over one node spacing below `1-δ`.
pub fn band_profile(delta: f64) -> Result<SphereProfile> {
    if !(delta > 0.0 && delta <= 1.0) {
        return domain(format!("band width must lie in (0, 1], got {delta}"));
    }
    if delta == 1.0 {
        return Ok(SphereProfile::constant(1.0));
    }
    let spacing = 0.25 * delta;
    let ramp = spacing.min(0.5 * (1.0 - delta));
    let edge = 1.0 - delta;
    let mut nodes = vec![0.0, edge - ramp];
    let mut values = vec![0.0, 0.0];
    for i in 0..=4 {
        nodes.push(if i == 4 { 1.0 } else { edge + i as f64 * spacing });
        values.push(1.0);
    }
    SphereProfile::from_real(nodes, values)
}

/// Oscillatory quadrature controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSpec {
    pub panels_per_wavelength: usize,
    pub max_panels: usize,
    pub abs_tol: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            panels_per_wavelength: 6,
            max_panels: 8192,
            abs_tol: 1e-10,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.panels_per_wavelength < 4 || self.max_panels == 0 || !(self.abs_tol > 0.0) {
            return domain("quadrature needs panels_per_wavelength ≥ 4, max_panels > 0, abs_tol > 0");
        }
        Ok(())
    }
}

/// Nodes of the profile integral in `r` with the slice weight
/// `r^{N-k-1}(1-r²)^{(k-2)/2}` folded into the weights. Panels are graded
/// toward `r = 1` and the last one carries a Gauss–Jacobi rule.
fn slice_rule(dim: SymmetryDim, profile_nodes: &[f64]) -> Rule {
    let order = 16;
    let e = 0.5 * (dim.k() as f64 - 2.0);
    let pow = (dim.outer_dim() - 1) as i32;
    let last_start = profile_nodes[profile_nodes.len() - 2];
    // grade every panel so no subpanel is wider than its distance to r = 1
    let mut breaks = vec![0.0];
    for w in profile_nodes[..profile_nodes.len() - 1].windows(2) {
        let (a, b) = (w[0], w[1]);
        let mut x = b;
        breaks.push(b);
        loop {
            let next = x - (1.0 - x);
            if next <= a {
                break;
            }
            breaks.push(next);
            x = next;
        }
    }
    let breaks = if last_start == 0.0 {
        vec![0.0]
    } else {
        normalize_breaks(breaks, 0.0, last_start)
    };
    let base = gauss_legendre(order);
    let mut rule = Rule {
        nodes: vec![],
        weights: vec![],
    };
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        let half = 0.5 * (b - a);
        for (x, wx) in base.nodes.iter().zip(&base.weights) {
            let r = 0.5 * (a + b) + half * x;
            rule.nodes.push(r);
            rule.weights
                .push(half * wx * r.powi(pow) * ((1.0 - r) * (1.0 + r)).powf(e));
        }
    }
    // last panel [c, 1]: (1-r)^e = ((1-c)/2)^e (1-x)^e
    let c = last_start;
    let half = 0.5 * (1.0 - c);
    let gj = gauss_jacobi(order, e, 0.0);
    for (x, wx) in gj.nodes.iter().zip(&gj.weights) {
        let r = c + half * (1.0 + x);
        rule.nodes.push(r);
        rule.weights
            .push(half * wx * half.powf(e) * r.powi(pow) * (1.0 + r).powf(e));
    }
    rule
}

/// `‖F‖_{L²(S^{N-1})}` from the profile.
pub fn sphere_l2_norm(dim: SymmetryDim, h: &SphereProfile) -> Result<f64> {
    let rule = slice_rule(dim, h.nodes());
    let integral: f64 = rule
        .nodes
        .iter()
        .zip(&rule.weights)
        .map(|(&r, &w)| w * h.eval(r).norm_sqr())
        .sum();
    let value = (dim.outer_area() * dim.inner_area() * integral).sqrt();
    if !value.is_finite() {
        return Err(Error::Accuracy {
            what: "sphere L² norm".into(),
            achieved: f64::INFINITY,
            requested: 0.0,
        });
    }
    Ok(value)
}

struct Level {
    panels: usize,
    sin: Vec<f64>,
    cos: Vec<f64>,
    /// Quadrature weight × angular weight × profile value.
    weighted: Vec<Complex64>,
}

/// Pre-tabulated angular rules for the reduced extension integral.
///
/// Level `j` uses panels no wider than `(π/8)·2^{-j}`, refined from the
/// images `asin(r_i)` of the profile nodes.
pub struct Extender {
    dim: SymmetryDim,
    quad: QuadratureSpec,
    levels: Vec<Level>,
}

const PANEL_ORDER: usize = 8;

impl Extender {
    pub fn new(dim: SymmetryDim, h: &SphereProfile, quad: QuadratureSpec) -> Result<Self> {
        quad.validate()?;
        let base: Vec<f64> = h.nodes().iter().map(|&r| r.asin()).collect();
        let base = normalize_breaks(base, 0.0, FRAC_PI_2);
        let gl = gauss_legendre(PANEL_ORDER);
        let p_out = (dim.outer_dim() - 1) as i32;
        let p_in = (dim.k() - 1) as i32;
        let mut levels = Vec::new();
        let mut width = PI / 8.0;
        loop {
            let breaks = refine_breaks(&base, width);
            let panels = breaks.len() - 1;
            if panels > quad.max_panels && !levels.is_empty() {
                break;
            }
            let mut level = Level {
                panels,
                sin: vec![],
                cos: vec![],
                weighted: vec![],
            };
            for w in breaks.windows(2) {
                let half = 0.5 * (w[1] - w[0]);
                for (x, wx) in gl.nodes.iter().zip(&gl.weights) {
                    let theta = 0.5 * (w[0] + w[1]) + half * x;
                    let (s, c) = theta.sin_cos();
                    let ang = s.powi(p_out) * c.powi(p_in);
                    level.sin.push(s);
                    level.cos.push(c);
                    level.weighted.push(h.eval(s) * (half * wx * ang));
                }
            }
            levels.push(level);
            if panels > quad.max_panels {
                break;
            }
            width *= 0.5;
        }
        Ok(Self { dim, quad, levels })
    }

    fn eval_level(&self, level: &Level, pt: ReducedPoint) -> Complex64 {
        let m1 = self.dim.outer_dim();
        let m2 = self.dim.k();
        let mut acc = Complex64::new(0.0, 0.0);
        for ((&s, &c), &w) in level.sin.iter().zip(&level.cos).zip(&level.weighted) {
            acc += w * (sphere_ft_unchecked(m1, pt.t * s) * sphere_ft_unchecked(m2, pt.s * c));
        }
        acc
    }

    /// First level whose panels resolve the oscillation at `pt`.
    fn level_for(&self, pt: ReducedPoint) -> usize {
        let freq = pt.t.abs() + pt.s.abs();
        let needed = if freq > 0.0 {
            2.0 * PI / (self.quad.panels_per_wavelength as f64 * freq)
        } else {
            f64::INFINITY
        };
        let mut width = PI / 8.0;
        for (j, level) in self.levels.iter().enumerate() {
            if width <= needed || level.panels > self.quad.max_panels {
                return j;
            }
            width *= 0.5;
        }
        self.levels.len() - 1
    }

    /// Extension at `pt` with a self-convergence check against the next
    /// finer level.
    pub fn eval(&self, pt: ReducedPoint) -> Result<Complex64> {
        let mut j = self.level_for(pt);
        loop {
            if j + 1 >= self.levels.len() || self.levels[j + 1].panels > self.quad.max_panels {
                let achieved = if j + 1 < self.levels.len() {
                    (self.eval_level(&self.levels[j + 1], pt) - self.eval_level(&self.levels[j], pt)).norm()
                } else {
                    f64::INFINITY
                };
                return Err(Error::Accuracy {
                    what: format!("reduced extension at (t, s) = ({}, {})", pt.t, pt.s),
                    achieved,
                    requested: self.quad.abs_tol,
                });
            }
            let coarse = self.eval_level(&self.levels[j], pt);
            let fine = self.eval_level(&self.levels[j + 1], pt);
            if (fine - coarse).norm() <= self.quad.abs_tol {
                return Ok(fine);
            }
            j += 1;
        }
    }

    /// Extension at `pt` on the level one finer than the resolving one,
    /// without the convergence check.
    pub fn eval_unchecked(&self, pt: ReducedPoint) -> Complex64 {
        let j = (self.level_for(pt) + 1).min(self.levels.len() - 1);
        self.eval_level(&self.levels[j], pt)
    }
}

/// Fourier extension `ďF_σ` at a point with reduced coordinates `pt`.
pub fn extend_reduced(
    dim: SymmetryDim,
    h: &SphereProfile,
    pt: ReducedPoint,
    quad: QuadratureSpec,
) -> Result<Complex64> {
    if !(pt.t.is_finite() && pt.s.is_finite()) || pt.t < 0.0 || pt.s < 0.0 {
        return domain(format!("reduced point must be finite and nonnegative, got {pt:?}"));
    }
    Extender::new(dim, h, quad)?.eval(pt)
}

/// Cauchy–Schwarz bound `‖h‖·(∫ w ďσ_{N-k}(rt)² ďσ_k(√(1-r²)s)²)^{1/2}` on
/// `|ďF_σ(t, s)|`, both factors computed with the slice rule.
pub fn extension_envelope(dim: SymmetryDim, h: &SphereProfile, pt: ReducedPoint) -> f64 {
    let mut nodes: Vec<f64> = h.nodes().to_vec();
    let extra = ((pt.t + pt.s) * 2.0).ceil() as usize;
    if extra > 0 {
        let fine: Vec<f64> = (1..extra).map(|i| i as f64 / extra as f64).collect();
        nodes.extend(fine);
        nodes = normalize_breaks(nodes, 0.0, 1.0);
    }
    let rule = slice_rule(dim, &nodes);
    let (mut a, mut b) = (0.0, 0.0);
    for (&r, &w) in rule.nodes.iter().zip(&rule.weights) {
        a += w * h.eval(r).norm_sqr();
        let c = (1.0 - r * r).max(0.0).sqrt();
        let k = sphere_ft_unchecked(dim.outer_dim(), r * pt.t) * sphere_ft_unchecked(dim.k(), c * pt.s);
        b += w * k * k;
    }
    (a * b).sqrt()
}

/// Product rule on `S^{m-1}` for `m ≤ 4` in hyperspherical angles, with
/// `n` nodes per polar angle and `2n` azimuthal nodes.
fn sphere_points(m: usize, n: usize) -> Vec<(Vec<f64>, f64)> {
    let gl = gauss_legendre(n);
    let polar: Vec<(f64, f64)> = gl
        .nodes
        .iter()
        .zip(&gl.weights)
        .map(|(&x, &w)| (0.5 * PI * (1.0 + x), 0.5 * PI * w))
        .collect();
    let na = 2 * n;
    let azimuth: Vec<f64> = (0..na).map(|i| 2.0 * PI * i as f64 / na as f64).collect();
    let wa = 2.0 * PI / na as f64;
    match m {
        1 => vec![(vec![1.0], 1.0), (vec![-1.0], 1.0)],
        2 => azimuth.iter().map(|&p| (vec![p.cos(), p.sin()], wa)).collect(),
        3 => {
            let mut out = Vec::with_capacity(n * na);
            for &(th, wt) in &polar {
                let (st, ct) = th.sin_cos();
                for &p in &azimuth {
                    out.push((vec![st * p.cos(), st * p.sin(), ct], wt * wa * st));
                }
            }
            out
        }
        4 => {
            let mut out = Vec::with_capacity(n * n * na);
            for &(ps, wp) in &polar {
                let (sp, cp) = ps.sin_cos();
                for &(th, wt) in &polar {
                    let (st, ct) = th.sin_cos();
                    for &p in &azimuth {
                        out.push((
                            vec![sp * st * p.cos(), sp * st * p.sin(), sp * ct, cp],
                            wp * wt * wa * sp * sp * st,
                        ));
                    }
                }
            }
            out
        }
        _ => unreachable!("direct sphere rules exist for m ≤ 4 only"),
    }
}

/// Direct angular quadrature of `(2π)^{-N/2} ∫_{S^{N-1}} e^{iω·x} F(ω) dσ(ω)`,
/// refined until two successive resolutions differ by at most `abs_tol`.
pub fn extend_direct<F>(f: F, x: &[f64], abs_tol: f64) -> Result<Complex64>
where
    F: Fn(&[f64]) -> Complex64 + Sync,
{
    let n = x.len();
    if n > 4 {
        return Err(Error::UnsupportedScale(format!(
            "direct sphere quadrature is limited to N ≤ 4, got N = {n}"
        )));
    }
    if n < 2 {
        return domain("direct extension needs N ≥ 2");
    }
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let scale = (2.0 * PI).powf(-(n as f64) / 2.0);
    let eval = |res: usize| -> Complex64 {
        let pts = sphere_points(n, res);
        // summed sequentially so the result does not depend on scheduling
        let terms: Vec<Complex64> = pts
            .par_iter()
            .map(|(w, wt)| {
                let phase: f64 = w.iter().zip(x).map(|(a, b)| a * b).sum();
                Complex64::from_polar(*wt, phase) * f(w)
            })
            .collect();
        terms.iter().sum::<Complex64>() * scale
    };
    let mut res = (norm.ceil() as usize / 2 + 12).max(12);
    let mut prev = eval(res);
    let mut achieved = f64::INFINITY;
    for _ in 0..4 {
        res = res * 3 / 2;
        let next = eval(res);
        achieved = (next - prev).norm();
        if achieved <= abs_tol {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::Accuracy {
        what: "direct sphere quadrature".into(),
        achieved,
        requested: abs_tol,
    })
}

/// Weighted `L^q` norm of the extension over `[0, trunc]²` in reduced
/// coordinates, with the tail beyond the box bounded separately.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LqNorm {
    /// `(∫∫_{[0,trunc]²} Q|ďF_σ|^q dx)^{1/q}`.
    pub value: f64,
    /// Bound on the norm increment from the region outside the box.
    pub tail: f64,
    /// Whether the tail integral of the decay envelope converges.
    pub tail_ok: bool,
    /// Empirical constant `C` in `|ďF_σ| ≤ C(1+t)^{-(N-k-1)/2}(1+s)^{-(k-1)/2}`.
    pub envelope: f64,
}

/// Integration nodes `(t, s, weight)` over the part of `[0, trunc]²` where
/// `Q` is supported; `weight` includes `Q` and the volume element.
fn weighted_nodes(dim: SymmetryDim, w: &WeightSpec, trunc: f64) -> Vec<(ReducedPoint, f64)> {
    let order = 8;
    let mut s_breaks = vec![0.0, trunc, 1.0];
    let mut t_table_breaks = vec![];
    match w {
        WeightSpec::PowerLayer { .. } => {
            let lowest = w.layer_height(trunc).min(trunc);
            let mut level = trunc;
            while level > lowest {
                if let Some(s) = w.layer_inverse(level) {
                    s_breaks.push(s);
                }
                level -= 1.0;
            }
        }
        WeightSpec::Sampled(table) => {
            s_breaks.extend(table.s_nodes.iter().copied());
            t_table_breaks = table.t_nodes.clone();
        }
    }
    let s_breaks = refine_breaks(&normalize_breaks(s_breaks, 0.0, trunc), 1.0);
    let s_rule = Rule::composite(&s_breaks, order);
    let (t_lo, s_lo) = match w {
        WeightSpec::Sampled(table) => (table.t_nodes[0], table.s_nodes[0]),
        _ => (0.0, 0.0),
    };
    let mut out = Vec::new();
    for (&s, &ws) in s_rule.nodes.iter().zip(&s_rule.weights) {
        if s < s_lo {
            continue;
        }
        let t_hi = w.layer_height(s).min(trunc);
        if t_hi <= t_lo {
            continue;
        }
        let mut tb = t_table_breaks.clone();
        tb.push(t_lo);
        let tb = refine_breaks(&normalize_breaks(tb, t_lo, t_hi), 1.0);
        let t_rule = Rule::composite(&tb, order);
        for (&t, &wt) in t_rule.nodes.iter().zip(&t_rule.weights) {
            let pt = ReducedPoint::new(t, s);
            let q = w.eval(pt);
            if q > 0.0 {
                out.push((pt, ws * wt * q * dim.volume_element(pt)));
            }
        }
    }
    out
}

fn envelope_decay(dim: SymmetryDim, pt: ReducedPoint) -> f64 {
    (1.0 + pt.t).powf(-0.5 * (dim.outer_dim() as f64 - 1.0)) * (1.0 + pt.s).powf(-0.5 * (dim.k() as f64 - 1.0))
}

/// `∫₀^upper x^a (1+x)^{-b} dx` by graded panels.
fn power_integral(a: f64, b: f64, upper: f64) -> f64 {
    if upper <= 0.0 {
        return 0.0;
    }
    let mut breaks = vec![0.0];
    let mut x = upper.min(1.0);
    breaks.push(x);
    while x < upper {
        x = (2.0 * x).min(upper);
        breaks.push(x);
    }
    Rule::composite(&breaks, 16).integrate(|x| x.powf(a) * (1.0 + x).powf(-b))
}

/// `∫_lo^∞ f` through `x = lo/u`, with panels graded toward `u = 0`.
fn half_line_integral(lo: f64, f: impl Fn(f64) -> f64) -> f64 {
    let mut breaks: Vec<f64> = (0..60).map(|j| 0.5f64.powi(j)).collect();
    breaks.push(0.0);
    breaks.reverse();
    Rule::composite(&breaks, 16).integrate(|u| {
        let x = lo / u;
        f(x) * lo / (u * u)
    })
}

/// Tail of `∫ Q (C·env)^q dx` outside `[0, trunc]²` and whether it converges.
fn tail_integral(dim: SymmetryDim, w: &WeightSpec, q: f64, trunc: f64, c: f64) -> (f64, bool) {
    let a_out = dim.outer_dim() as f64 - 1.0;
    let a_in = dim.k() as f64 - 1.0;
    let scale = dim.outer_area() * dim.inner_area() * c.powf(q);
    match w {
        WeightSpec::PowerLayer { alpha, beta, cap, .. } => {
            if *cap == 0.0 {
                return (0.0, true);
            }
            let nk = dim.outer_dim() as f64;
            let k = dim.k() as f64;
            let beyond_s = a_in * (1.0 - 0.5 * q) - beta * nk < -1.0;
            let beyond_t = a_out * (1.0 - 0.5 * q) - k / alpha < -1.0;
            if !(beyond_s && beyond_t) {
                return (f64::INFINITY, false);
            }
            let t1 = half_line_integral(trunc, |s| {
                s.powf(a_in)
                    * (1.0 + s).powf(-0.5 * q * a_in)
                    * power_integral(a_out, 0.5 * q * a_out, w.layer_height(s))
            });
            let t2 = half_line_integral(trunc, |t| {
                let s_max = w.layer_inverse(t).unwrap_or(0.0).min(trunc);
                t.powf(a_out) * (1.0 + t).powf(-0.5 * q * a_out) * power_integral(a_in, 0.5 * q * a_in, s_max)
            });
            (cap * scale * (t1 + t2), true)
        }
        WeightSpec::Sampled(table) => {
            let t_max = *table.t_nodes.last().unwrap();
            let s_max = *table.s_nodes.last().unwrap();
            if t_max <= trunc && s_max <= trunc {
                return (0.0, true);
            }
            let env = |t: f64, s: f64| {
                t.powf(a_out) * (1.0 + t).powf(-0.5 * q * a_out) * s.powf(a_in) * (1.0 + s).powf(-0.5 * q * a_in)
            };
            let rule = |lo: f64, hi: f64| Rule::composite(&refine_breaks(&[lo, hi], 1.0), 8);
            let mut total = 0.0;
            let ts = rule(table.t_nodes[0], t_max);
            let ss = rule(table.s_nodes[0], s_max);
            for (&t, &wt) in ts.nodes.iter().zip(&ts.weights) {
                for (&s, &wsw) in ss.nodes.iter().zip(&ss.weights) {
                    if t > trunc || s > trunc {
                        total += wt * wsw * table.sup() * env(t, s);
                    }
                }
            }
            (scale * total, true)
        }
    }
}

/// Weighted norms for several exponents from one set of extension samples.
pub fn weighted_lq_norms(
    dim: SymmetryDim,
    h: &SphereProfile,
    w: &WeightSpec,
    qs: &[f64],
    trunc: f64,
    quad: QuadratureSpec,
) -> Result<Vec<LqNorm>> {
    if let Some(q) = qs.iter().find(|q| !(**q >= 1.0)) {
        return domain(format!("exponent q must be ≥ 1, got {q}"));
    }
    if !(trunc > 0.0) || !trunc.is_finite() {
        return domain(format!("truncation must be positive, got {trunc}"));
    }
    w.validate()?;
    if qs.is_empty() {
        return Ok(vec![]);
    }
    if w.is_zero() {
        return Ok(qs
            .iter()
            .map(|_| LqNorm {
                value: 0.0,
                tail: 0.0,
                tail_ok: true,
                envelope: 0.0,
            })
            .collect());
    }
    let ext = Extender::new(dim, h, quad)?;
    let nodes = weighted_nodes(dim, w, trunc);
    let moduli: Vec<f64> = nodes.par_iter().map(|(pt, _)| ext.eval_unchecked(*pt).norm()).collect();
    let envelope = nodes
        .iter()
        .zip(&moduli)
        .map(|((pt, _), m)| m / envelope_decay(dim, *pt))
        .fold(0.0, f64::max);
    Ok(qs
        .iter()
        .map(|&q| {
            let integral: f64 = nodes.iter().zip(&moduli).map(|((_, wt), m)| wt * m.powf(q)).sum();
            let value = integral.powf(1.0 / q);
            let (tail_int, tail_ok) = tail_integral(dim, w, q, trunc, envelope);
            let tail = if tail_ok {
                (integral + tail_int).powf(1.0 / q) - value
            } else {
                f64::INFINITY
            };
            LqNorm {
                value,
                tail,
                tail_ok,
                envelope,
            }
        })
        .collect())
}

/// `‖Q ďF_σ‖_{L^q}` over the truncation box, with the tail reported separately.
pub fn weighted_lq_norm(
    dim: SymmetryDim,
    h: &SphereProfile,
    w: &WeightSpec,
    q: f64,
    trunc: f64,
    quad: QuadratureSpec,
) -> Result<LqNorm> {
    Ok(weighted_lq_norms(dim, h, w, &[q], trunc, quad)?[0])
}

/// One row of an admissibility scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub q: f64,
    pub param: f64,
    pub norm_q: f64,
    pub norm_2: f64,
    pub ratio: f64,
    pub tail_ok: bool,
}

/// Ratios `‖Q ďF_σ‖_q / ‖F‖₂` over a profile family, one row per
/// `(q, parameter)` pair, ordered by `q` and then by family position.
pub fn admissibility_scan(
    dim: SymmetryDim,
    w: &WeightSpec,
    qs: &[f64],
    family: &[(f64, SphereProfile)],
    trunc: f64,
    quad: QuadratureSpec,
) -> Result<Vec<ScanRow>> {
    if qs.is_empty() || family.is_empty() {
        return Ok(vec![]);
    }
    let per_member: Vec<Result<(f64, Vec<LqNorm>)>> = family
        .par_iter()
        .map(|(_, h)| {
            let norm_2 = sphere_l2_norm(dim, h)?;
            Ok((norm_2, weighted_lq_norms(dim, h, w, qs, trunc, quad)?))
        })
        .collect();
    let per_member: Vec<(f64, Vec<LqNorm>)> = per_member.into_iter().collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(qs.len() * family.len());
    for (iq, &q) in qs.iter().enumerate() {
        for ((param, _), (norm_2, norms)) in family.iter().zip(&per_member) {
            let lq = norms[iq];
            rows.push(ScanRow {
                q,
                param: *param,
                norm_q: lq.value,
                norm_2: *norm_2,
                ratio: lq.value / norm_2,
                tail_ok: lq.tail_ok,
            });
        }
    }
    Ok(rows)
}

/// `∫_{S^{N-1}} g dσ` for a `G_k`-invariant `g` given through its profile.
pub fn sphere_integral(dim: SymmetryDim, g: impl Fn(f64) -> Complex64) -> Complex64 {
    let rule = slice_rule(dim, &uniform_breaks(0.0, 1.0, 16));
    let sum: Complex64 = rule.nodes.iter().zip(&rule.weights).map(|(&r, &w)| g(r) * w).sum();
    sum * (dim.outer_area() * dim.inner_area())
}

/// `‖(Qf)^|_{S^{N-1}}‖_{L²}` for a space-side field `f`.
///
/// The transform of `Qf` is evaluated on the unit frequency circle
/// `(ρ₁, ρ₂) = (r, √(1-r²))` directly from the space-side quadrature.
pub fn restriction_norm(dim: SymmetryDim, f: &BiRadialField, w: &WeightSpec) -> Result<f64> {
    let trace = restriction_trace(dim, f, w)?;
    Ok(sphere_integral(dim, |r| Complex64::new(trace(r).norm_sqr(), 0.0))
        .re
        .sqrt())
}

/// The restricted transform `r ↦ (Qf)^(r, √(1-r²))` as a closure.
pub fn restriction_trace(dim: SymmetryDim, f: &BiRadialField, w: &WeightSpec) -> Result<impl Fn(f64) -> Complex64> {
    w.validate()?;
    if f.side() != Side::Space {
        return domain("restriction needs a space-side field");
    }
    if f.grid().dim() != dim {
        return domain("field and symmetry dimensions differ");
    }
    // the unit frequency oscillates with period 2π in space
    let spec = f.grid().spec();
    let coarsest = [&spec.t, &spec.s]
        .iter()
        .flat_map(|a| a.breaks.windows(2).map(move |p| (p[1] - p[0]) / a.order as f64))
        .fold(0.0f64, f64::max);
    let limit = PI / 4.0;
    if coarsest > limit {
        return Err(Error::Accuracy {
            what: "space grid resolution of the unit frequency circle".into(),
            achieved: coarsest,
            requested: limit,
        });
    }
    let qf = f.map_nodes(|t, s, v| v * w.eval(ReducedPoint::new(t, s)));
    Ok(move |r: f64| {
        let r = r.clamp(0.0, 1.0);
        qf.transform_at(ReducedPoint::new(r, ((1.0 - r) * (1.0 + r)).sqrt()))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn profile_interpolation_reproduces_nodes_and_lines() {
        let h = SphereProfile::from_real(vec![0.0, 0.3, 0.6, 1.0], vec![0.0, 0.3, 0.6, 1.0]).unwrap();
        for &r in &[0.0, 0.1, 0.45, 0.77, 1.0] {
            assert_relative_eq!(h.eval(r).re, r, epsilon = 1e-14);
        }
    }

    #[test]
    fn band_is_a_step() {
        let h = band_profile(0.25).unwrap();
        assert_eq!(h.eval(0.5).re, 0.0);
        assert_eq!(h.eval(0.8).re, 1.0);
        assert_eq!(h.eval(1.0).re, 1.0);
        assert!(band_profile(0.0).is_err());
    }

    #[test]
    fn slice_rule_integrates_beta_weight() {
        // ∫₀¹ r^{N-k-1}(1-r²)^{(k-2)/2} dr = B((N-k)/2, k/2)/2
        let dim = SymmetryDim::new(3, 1).unwrap();
        let rule = slice_rule(dim, &[0.0, 0.5, 0.99, 1.0]);
        let total: f64 = rule.weights.iter().sum();
        assert_relative_eq!(total, 1.0, epsilon = 1e-13);
    }

    #[test]
    fn power_integral_closed_form() {
        // ∫₀^5 x (1+x)^{-3} dx = [-1/(1+x) + 1/(2(1+x)²)]₀^5
        let f = |x: f64| -1.0 / (1.0 + x) + 0.5 / (1.0 + x).powi(2);
        assert_relative_eq!(power_integral(1.0, 3.0, 5.0), f(5.0) - f(0.0), epsilon = 1e-13);
        assert_relative_eq!(half_line_integral(2.0, |x| x.powi(-3)), 0.125, epsilon = 1e-12);
    }
}
