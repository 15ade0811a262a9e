//! Bi-radial Fourier transform, the outgoing Helmholtz resolvent and the
//! weighted operator `K_Q`.
//!
//! For a `G_k`-invariant function the `N`-dimensional Fourier transform
//! separates over the two orbit factors:
//!
//! ```text
//! f̂(ρ₁, ρ₂) = ∫∫ f(t, s) t^{N-k-1} s^{k-1} ďσ_{N-k}(tρ₁) ďσ_k(sρ₂) dt ds,
//! ```
//!
//! and the same kernel maps back, so the transform is its own inverse. On
//! tensor Gauss–Legendre grids it is two dense contractions, one per axis.

use crate::error::{domain, Error, Result};
use crate::geometry::{ReducedPoint, SymmetryDim, WeightSpec};
use crate::quadrature::{normalize_breaks, refine_breaks, Rule};
use crate::specfun::{helmholtz_kernel, sphere_ft_unchecked};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

/// Composite Gauss–Legendre axis described by its panel breakpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    pub breaks: Vec<f64>,
    pub order: usize,
}

impl AxisSpec {
    /// Equal panels of width at most `width` on `[0, max]`.
    pub fn uniform(max: f64, width: f64, order: usize) -> Self {
        Self {
            breaks: refine_breaks(&[0.0, max], width),
            order,
        }
    }

    /// Panels growing geometrically from `min_width` at the origin up to
    /// `width`, then uniform to `max`.
    pub fn graded(max: f64, min_width: f64, width: f64, order: usize) -> Self {
        let mut breaks = vec![0.0];
        let mut x = 0.0;
        let mut h = min_width;
        while x + h < max && h < width {
            x += h;
            breaks.push(x);
            h *= 2.0;
        }
        let breaks = refine_breaks(&normalize_breaks(breaks, 0.0, max), width);
        Self { breaks, order }
    }

    /// Fine panels of width `fine` on `[0, fine_end]`, coarse panels beyond.
    pub fn two_scale(max: f64, fine_end: f64, fine: f64, coarse: f64, order: usize) -> Self {
        let fine_end = fine_end.min(max);
        let mut breaks = refine_breaks(&[0.0, fine_end], fine);
        if max > fine_end {
            breaks.extend(refine_breaks(&[fine_end, max], coarse).into_iter().skip(1));
        }
        Self { breaks, order }
    }

    pub fn max(&self) -> f64 {
        *self.breaks.last().unwrap_or(&0.0)
    }

    pub fn rule(&self) -> Rule {
        Rule::composite(&self.breaks, self.order)
    }
}

/// Serializable description of a bi-radial grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n: usize,
    pub k: usize,
    pub t: AxisSpec,
    pub s: AxisSpec,
    pub rho1: AxisSpec,
    pub rho2: AxisSpec,
    /// Relative `L²` mass allowed in the outer tenth of each axis before a
    /// transform reports a truncation error; `None` disables the check.
    #[serde(default)]
    pub tail_tol: Option<f64>,
}

impl GridSpec {
    /// Desk-scale grid: space panels of width `space_width` on `[0, T]`, and
    /// frequency panels of width `fine_width` up to `1.5`, then `0.25` to `Ξ`.
    pub fn desk(dim: SymmetryDim, t_max: f64, xi_max: f64, space_width: f64, fine_width: f64) -> Self {
        let space = AxisSpec::uniform(t_max, space_width, 8);
        let freq = AxisSpec::two_scale(xi_max, 1.5, fine_width, 0.25, 8);
        Self {
            n: dim.n(),
            k: dim.k(),
            t: space.clone(),
            s: space,
            rho1: freq.clone(),
            rho2: freq,
            tail_tol: None,
        }
    }
}

/// Which side of the transform a field lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Space,
    Frequency,
}

impl Side {
    pub fn opposite(self) -> Self {
        match self {
            Side::Space => Side::Frequency,
            Side::Frequency => Side::Space,
        }
    }
}

#[derive(Debug)]
struct Axis {
    nodes: Vec<f64>,
    /// `weight × node^{power}` for the factor dimension of this axis.
    measure: Vec<f64>,
}

impl Axis {
    fn new(spec: &AxisSpec, power: i32) -> Self {
        let rule = spec.rule();
        let measure = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .map(|(&x, &w)| w * x.powi(power))
            .collect();
        Self {
            nodes: rule.nodes,
            measure,
        }
    }
}

/// Tensor grids in space `(t, s) ∈ [0, T]²` and frequency `(ρ₁, ρ₂) ∈ [0, Ξ]²`
/// with the two transform kernels.
#[derive(Debug)]
pub struct BiRadialGrid {
    spec: GridSpec,
    dim: SymmetryDim,
    t: Axis,
    s: Axis,
    rho1: Axis,
    rho2: Axis,
    /// `ďσ_{N-k}(t_i ρ₁_a)`, shape `n_ρ₁ × n_t`.
    kernel_outer: DMatrix<f64>,
    /// `ďσ_k(s_j ρ₂_b)`, shape `n_ρ₂ × n_s`.
    kernel_inner: DMatrix<f64>,
}

fn kernel_matrix(m: usize, freq: &[f64], space: &[f64]) -> DMatrix<f64> {
    let rows: Vec<Vec<f64>> = freq
        .par_iter()
        .map(|&rho| space.iter().map(|&x| sphere_ft_unchecked(m, rho * x)).collect())
        .collect();
    DMatrix::from_fn(freq.len(), space.len(), |a, i| rows[a][i])
}

impl BiRadialGrid {
    pub fn new(spec: GridSpec) -> Result<Arc<Self>> {
        let dim = SymmetryDim::new(spec.n, spec.k)?;
        for (name, axis) in [
            ("t", &spec.t),
            ("s", &spec.s),
            ("rho1", &spec.rho1),
            ("rho2", &spec.rho2),
        ] {
            if axis.order == 0 || axis.breaks.len() < 2 || axis.breaks[0] != 0.0 {
                return domain(format!("axis {name} must start at 0 with at least one panel"));
            }
            if axis.breaks.windows(2).any(|w| w[0] >= w[1]) || axis.breaks.iter().any(|x| !x.is_finite()) {
                return domain(format!("axis {name} breakpoints must be finite and increasing"));
            }
            if (axis.breaks.len() - 1) * axis.order < 16 {
                return domain(format!("axis {name} needs at least 16 nodes"));
            }
            if axis.max() <= 2.0 {
                return domain(format!("axis {name} must extend beyond 2, got {}", axis.max()));
            }
        }
        let p_out = (dim.outer_dim() - 1) as i32;
        let p_in = (dim.k() - 1) as i32;
        let t = Axis::new(&spec.t, p_out);
        let s = Axis::new(&spec.s, p_in);
        let rho1 = Axis::new(&spec.rho1, p_out);
        let rho2 = Axis::new(&spec.rho2, p_in);
        let kernel_outer = kernel_matrix(dim.outer_dim(), &rho1.nodes, &t.nodes);
        let kernel_inner = kernel_matrix(dim.k(), &rho2.nodes, &s.nodes);
        Ok(Arc::new(Self {
            spec,
            dim,
            t,
            s,
            rho1,
            rho2,
            kernel_outer,
            kernel_inner,
        }))
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn dim(&self) -> SymmetryDim {
        self.dim
    }

    /// Node coordinates `(first axis, second axis)` on the given side.
    pub fn nodes(&self, side: Side) -> (&[f64], &[f64]) {
        match side {
            Side::Space => (&self.t.nodes, &self.s.nodes),
            Side::Frequency => (&self.rho1.nodes, &self.rho2.nodes),
        }
    }

    pub fn shape(&self, side: Side) -> (usize, usize) {
        let (a, b) = self.nodes(side);
        (a.len(), b.len())
    }

    fn axes(&self, side: Side) -> (&Axis, &Axis) {
        match side {
            Side::Space => (&self.t, &self.s),
            Side::Frequency => (&self.rho1, &self.rho2),
        }
    }

    /// Quadrature weight times the volume element at node `(i, j)`.
    pub fn cell_measure(&self, side: Side, i: usize, j: usize) -> f64 {
        let (a, b) = self.axes(side);
        self.dim.outer_area() * self.dim.inner_area() * a.measure[i] * b.measure[j]
    }

    /// All cell measures in row-major order.
    pub fn measures(&self, side: Side) -> Vec<f64> {
        let (a, b) = self.axes(side);
        let c = self.dim.outer_area() * self.dim.inner_area();
        a.measure
            .iter()
            .flat_map(|&x| b.measure.iter().map(move |&y| c * x * y))
            .collect()
    }

    pub fn t_max(&self) -> f64 {
        self.spec.t.max().max(self.spec.s.max())
    }

    pub fn xi_max(&self) -> f64 {
        self.spec.rho1.max().max(self.spec.rho2.max())
    }

    /// Applies the transform to a real row-major array on `side`.
    fn apply_real(&self, from: Side, values: &[f64]) -> Vec<f64> {
        let (a_in, b_in) = self.axes(from);
        let (na, nb) = (a_in.nodes.len(), b_in.nodes.len());
        // scale by the source measures, then contract each axis
        let scaled = DMatrix::from_fn(na, nb, |i, j| values[i * nb + j] * a_in.measure[i] * b_in.measure[j]);
        let (ka, kb) = match from {
            Side::Space => (self.kernel_outer.clone_owned(), self.kernel_inner.clone_owned()),
            Side::Frequency => (self.kernel_outer.transpose(), self.kernel_inner.transpose()),
        };
        let first = par_matmul(&ka, &scaled);
        let out = par_matmul(&first, &kb.transpose());
        let (ma, mb) = (out.nrows(), out.ncols());
        let mut flat = vec![0.0; ma * mb];
        for i in 0..ma {
            for j in 0..mb {
                flat[i * mb + j] = out[(i, j)];
            }
        }
        flat
    }

    /// Evaluates the transform of a field on `from` at an arbitrary point of
    /// the opposite side.
    fn apply_at(&self, from: Side, values: &[Complex64], x: f64, y: f64) -> Complex64 {
        let (a_in, b_in) = self.axes(from);
        let nb = b_in.nodes.len();
        let kb: Vec<f64> = b_in
            .nodes
            .iter()
            .zip(&b_in.measure)
            .map(|(&v, &m)| m * sphere_ft_unchecked(self.dim.k(), v * y))
            .collect();
        a_in.nodes
            .iter()
            .zip(&a_in.measure)
            .enumerate()
            .map(|(i, (&u, &m))| {
                let row = &values[i * nb..(i + 1) * nb];
                let inner: Complex64 = row.iter().zip(&kb).map(|(v, k)| v * k).sum();
                inner * (m * sphere_ft_unchecked(self.dim.outer_dim(), u * x))
            })
            .sum()
    }
}

/// Row-block parallel matrix product.
fn par_matmul(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let rows = a.nrows();
    let block = 64;
    let starts: Vec<usize> = (0..rows).step_by(block).collect();
    let parts: Vec<DMatrix<f64>> = starts
        .par_iter()
        .map(|&r0| {
            let h = block.min(rows - r0);
            a.rows(r0, h) * b
        })
        .collect();
    let mut out = DMatrix::zeros(rows, b.ncols());
    for (&r0, part) in starts.iter().zip(&parts) {
        out.rows_mut(r0, part.nrows()).copy_from(part);
    }
    out
}

/// `(coordinate, value)` pairs along one axis.
pub type Slice = Vec<(f64, Complex64)>;

/// Complex samples of a `G_k`-invariant function on one side of a grid,
/// row-major in (first axis, second axis).
#[derive(Debug, Clone)]
pub struct BiRadialField {
    grid: Arc<BiRadialGrid>,
    side: Side,
    values: Vec<Complex64>,
}

impl BiRadialField {
    pub fn new(grid: Arc<BiRadialGrid>, side: Side, values: Vec<Complex64>) -> Result<Self> {
        let (a, b) = grid.shape(side);
        if values.len() != a * b {
            return Err(Error::Format(format!(
                "field has {} values, grid needs {}",
                values.len(),
                a * b
            )));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return domain("field values must be finite");
        }
        Ok(Self { grid, side, values })
    }

    pub fn from_real(grid: Arc<BiRadialGrid>, side: Side, values: Vec<f64>) -> Result<Self> {
        Self::new(grid, side, values.into_iter().map(|v| Complex64::new(v, 0.0)).collect())
    }

    pub fn zeros(grid: Arc<BiRadialGrid>, side: Side) -> Self {
        let (a, b) = grid.shape(side);
        Self {
            grid,
            side,
            values: vec![Complex64::new(0.0, 0.0); a * b],
        }
    }

    /// Samples `f(x, y)` at every node on `side`.
    pub fn from_fn(grid: Arc<BiRadialGrid>, side: Side, f: impl Fn(f64, f64) -> Complex64) -> Self {
        let (xa, xb) = grid.nodes(side);
        let values = xa
            .iter()
            .flat_map(|&x| xb.iter().map(move |&y| (x, y)))
            .map(|(x, y)| f(x, y))
            .collect();
        Self { grid, side, values }
    }

    pub fn grid(&self) -> &Arc<BiRadialGrid> {
        &self.grid
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn shape(&self) -> (usize, usize) {
        self.grid.shape(self.side)
    }

    pub fn real_parts(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.re).collect()
    }

    pub fn is_real(&self) -> bool {
        self.values.iter().all(|v| v.im == 0.0)
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self {
            grid: self.grid.clone(),
            side: self.side,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Node-wise map that also sees the node coordinates.
    pub fn map_nodes(&self, f: impl Fn(f64, f64, Complex64) -> Complex64) -> Self {
        let (xa, xb) = self.grid.nodes(self.side);
        let nb = xb.len();
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(idx, &v)| f(xa[idx / nb], xb[idx % nb], v))
            .collect();
        Self {
            grid: self.grid.clone(),
            side: self.side,
            values,
        }
    }

    /// `(∫ |f|^p)^{1/p}` with the reduced volume element.
    pub fn lp_norm(&self, p: f64) -> f64 {
        let m = self.grid.measures(self.side);
        self.values
            .iter()
            .zip(&m)
            .map(|(v, w)| w * v.norm().powf(p))
            .sum::<f64>()
            .powf(1.0 / p)
    }

    pub fn l2_norm(&self) -> f64 {
        let m = self.grid.measures(self.side);
        self.values
            .iter()
            .zip(&m)
            .map(|(v, w)| w * v.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// `∫ f·g` (no conjugation) with the reduced volume element.
    pub fn integral_product(&self, other: &Self) -> Result<Complex64> {
        self.check_compatible(other)?;
        let m = self.grid.measures(self.side);
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .zip(&m)
            .map(|((a, b), w)| a * b * w)
            .sum())
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if !Arc::ptr_eq(&self.grid, &other.grid) || self.side != other.side {
            return domain("fields live on different grids or sides");
        }
        Ok(())
    }

    /// `f - g` on a shared grid.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        Ok(Self {
            grid: self.grid.clone(),
            side: self.side,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        })
    }

    /// Values along each axis at the node nearest the other axis:
    /// `(x, f(x, y₀))` then `(y, f(x₀, y))`.
    pub fn slices(&self) -> (Slice, Slice) {
        let (xs, ys) = self.grid.nodes(self.side);
        let cols = ys.len();
        let first = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| (x, self.values[i * cols]))
            .collect();
        let second = ys.iter().enumerate().map(|(j, &y)| (y, self.values[j])).collect();
        (first, second)
    }

    /// Relative `L²` mass in the outer tenth of either axis.
    pub fn boundary_fraction(&self) -> f64 {
        let (xa, xb) = self.grid.nodes(self.side);
        let (ma, mb) = (xa.last().copied().unwrap_or(0.0), xb.last().copied().unwrap_or(0.0));
        let m = self.grid.measures(self.side);
        let nb = xb.len();
        let (mut edge, mut total) = (0.0, 0.0);
        for (idx, (v, w)) in self.values.iter().zip(&m).enumerate() {
            let e = w * v.norm_sqr();
            total += e;
            if xa[idx / nb] > 0.9 * ma || xb[idx % nb] > 0.9 * mb {
                edge += e;
            }
        }
        if total > 0.0 {
            (edge / total).sqrt()
        } else {
            0.0
        }
    }

    /// Value of the transform of this field at an arbitrary point of the
    /// opposite side.
    pub fn transform_at(&self, pt: ReducedPoint) -> Complex64 {
        self.grid.apply_at(self.side, &self.values, pt.t, pt.s)
    }
}

/// Bi-radial Fourier transform to the opposite side of the grid.
pub fn transform(f: &BiRadialField) -> Result<BiRadialField> {
    let grid = &f.grid;
    if let Some(tol) = grid.spec.tail_tol {
        let fraction = f.boundary_fraction();
        if fraction > tol {
            return Err(Error::Accuracy {
                what: format!("{:?}-side truncation of the transform input", f.side),
                achieved: fraction,
                requested: tol,
            });
        }
    }
    let re: Vec<f64> = f.values.iter().map(|v| v.re).collect();
    let out_re = grid.apply_real(f.side, &re);
    let values = if f.is_real() {
        out_re.into_iter().map(|v| Complex64::new(v, 0.0)).collect()
    } else {
        let im: Vec<f64> = f.values.iter().map(|v| v.im).collect();
        let out_im = grid.apply_real(f.side, &im);
        out_re
            .into_iter()
            .zip(out_im)
            .map(|(a, b)| Complex64::new(a, b))
            .collect()
    };
    Ok(BiRadialField {
        grid: grid.clone(),
        side: f.side.opposite(),
        values,
    })
}

/// Limiting-absorption multiplier.
///
/// The outgoing multiplier `lim_{ε→0⁺} 1/(ρ² - 1 - iε)` is approximated by
/// Richardson extrapolation over `eps_ladder`. The extrapolation is applied
/// only inside the smooth band `|ρ - 1| < band_outer`; outside it the exact
/// limit `1/(ρ² - 1)` is used. This does not change the distributional limit
/// and removes the `O(ε^L)` extrapolation error away from the unit sphere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiplierSpec {
    pub eps_ladder: Vec<f64>,
    #[serde(default = "default_band")]
    pub band: (f64, f64),
    /// Largest accepted relative extrapolation residual.
    #[serde(default = "default_residual_tol")]
    pub residual_tol: f64,
}

fn default_band() -> (f64, f64) {
    (0.05, 0.1)
}

fn default_residual_tol() -> f64 {
    0.5
}

impl Default for MultiplierSpec {
    fn default() -> Self {
        Self {
            eps_ladder: vec![0.1, 0.05, 0.025],
            band: default_band(),
            residual_tol: default_residual_tol(),
        }
    }
}

/// Smooth transition from 1 on `[0, inner]` to 0 on `[outer, ∞)`.
pub fn smooth_step(d: f64, inner: f64, outer: f64) -> f64 {
    let d = d.abs();
    if d <= inner {
        return 1.0;
    }
    if d >= outer {
        return 0.0;
    }
    let x = (outer - d) / (outer - inner);
    let a = (-1.0 / x).exp();
    let b = (-1.0 / (1.0 - x)).exp();
    a / (a + b)
}

/// Weights `c_j` with `Σ c_j g(ε_j) = g(0)` for polynomials `g` of degree
/// below the ladder length.
pub fn richardson_weights(ladder: &[f64]) -> Vec<f64> {
    (0..ladder.len())
        .map(|j| {
            ladder
                .iter()
                .enumerate()
                .filter(|(m, _)| *m != j)
                .map(|(_, &em)| em / (em - ladder[j]))
                .product()
        })
        .collect()
}

impl MultiplierSpec {
    pub fn validate(&self) -> Result<()> {
        if self.eps_ladder.is_empty()
            || self.eps_ladder.iter().any(|e| !(*e > 0.0))
            || self.eps_ladder.windows(2).any(|w| w[0] <= w[1])
        {
            return domain("the ε ladder must be positive and strictly decreasing");
        }
        let (a, b) = self.band;
        if !(a > 0.0 && b > a && b < 1.0) {
            return domain("the extrapolation band needs 0 < inner < outer < 1");
        }
        Ok(())
    }

    fn extrapolate(ladder: &[f64], x: f64) -> Complex64 {
        richardson_weights(ladder)
            .iter()
            .zip(ladder)
            .map(|(c, &e)| *c / Complex64::new(x, -e))
            .sum()
    }

    fn eval_with(&self, ladder: &[f64], rho: f64) -> Complex64 {
        let x = (rho - 1.0) * (rho + 1.0);
        let chi = smooth_step(rho - 1.0, self.band.0, self.band.1);
        let outer = if chi < 1.0 {
            Complex64::new((1.0 - chi) / x, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        };
        if chi > 0.0 {
            Self::extrapolate(ladder, x) * chi + outer
        } else {
            outer
        }
    }

    /// Extrapolated multiplier at `|ξ| = rho`.
    pub fn eval(&self, rho: f64) -> Complex64 {
        self.eval_with(&self.eps_ladder, rho)
    }

    /// The same multiplier at a single fixed `ε` (no extrapolation).
    pub fn eval_fixed(&self, rho: f64, eps: f64) -> Complex64 {
        1.0 / Complex64::new((rho - 1.0) * (rho + 1.0), -eps)
    }

    /// Lower-order estimate from the finest `L-1` ladder entries.
    fn eval_lower(&self, rho: f64) -> Complex64 {
        let ladder = &self.eps_ladder;
        if ladder.len() < 2 {
            return self.eval(rho);
        }
        self.eval_with(&ladder[1..], rho)
    }
}

fn multiply(fhat: &BiRadialField, m: impl Fn(f64) -> Complex64) -> BiRadialField {
    fhat.map_nodes(|a, b, v| v * m(a.hypot(b)))
}

/// Multiplies a frequency-side field by the outgoing multiplier. Returns
/// the product and the extrapolation residual: the `L²` gap between the full
/// and the next lower-order extrapolant, relative to `‖f̂‖₂`.
pub fn apply_multiplier(fhat: &BiRadialField, mult: &MultiplierSpec) -> Result<(BiRadialField, f64)> {
    mult.validate()?;
    if fhat.side != Side::Frequency {
        return domain("the multiplier acts on frequency-side fields");
    }
    let u = multiply(fhat, |r| mult.eval(r));
    let lower = multiply(fhat, |r| mult.eval_lower(r));
    let norm = fhat.l2_norm();
    let residual = if norm > 0.0 {
        u.sub(&lower)?.l2_norm() / norm
    } else {
        0.0
    };
    Ok((u, residual))
}

/// Frequency-side outgoing resolvent `f̂·m` with its extrapolation residual.
pub fn resolvent_frequency(f: &BiRadialField, mult: &MultiplierSpec) -> Result<(BiRadialField, f64)> {
    mult.validate()?;
    if f.side != Side::Space {
        return domain("the resolvent acts on space-side fields");
    }
    apply_multiplier(&transform(f)?, mult)
}

/// `ℛf = Φ * f` through the limiting-absorption multiplier.
pub fn apply_resolvent(f: &BiRadialField, mult: &MultiplierSpec) -> Result<BiRadialField> {
    let (uhat, residual) = resolvent_frequency(f, mult)?;
    if residual > mult.residual_tol {
        return Err(Error::Accuracy {
            what: format!("ε-extrapolation of the resolvent (ladder {:?})", mult.eps_ladder),
            achieved: residual,
            requested: mult.residual_tol,
        });
    }
    transform(&uhat)
}

/// `Re(ℛf)` for real `f`. Since the transform kernels are real, this is
/// the inverse transform of `Re(m)·f̂`.
pub fn apply_real_resolvent(f: &BiRadialField, mult: &MultiplierSpec) -> Result<BiRadialField> {
    mult.validate()?;
    if !f.is_real() {
        return domain("the real resolvent needs a real input field");
    }
    if f.side != Side::Space {
        return domain("the resolvent acts on space-side fields");
    }
    let fhat = transform(f)?;
    let uhat = multiply(&fhat, |r| Complex64::new(mult.eval(r).re, 0.0));
    transform(&uhat)
}

/// `Q^{1/p}` at every space node, with `0^{1/p} = 0`.
pub fn weight_root(grid: &Arc<BiRadialGrid>, w: &WeightSpec, p: f64) -> Vec<f64> {
    let (ts, ss) = grid.nodes(Side::Space);
    ts.iter()
        .flat_map(|&t| ss.iter().map(move |&s| (t, s)))
        .map(|(t, s)| {
            let q = w.eval(ReducedPoint::new(t, s));
            if q > 0.0 {
                q.powf(1.0 / p)
            } else {
                0.0
            }
        })
        .collect()
}

fn check_exponent(dim: SymmetryDim, p: f64) -> Result<()> {
    let upper = 2.0 * dim.n() as f64 / (dim.n() as f64 - 2.0);
    if !(p > 2.0 && p < upper) {
        return domain(format!("p must lie in (2, {upper}), got {p}"));
    }
    Ok(())
}

/// Real resolvent with a precomputed real multiplier on the frequency grid.
pub(crate) struct RealResolvent {
    grid: Arc<BiRadialGrid>,
    multiplier: Vec<f64>,
}

impl RealResolvent {
    pub(crate) fn new(grid: &Arc<BiRadialGrid>, mult: &MultiplierSpec) -> Result<Self> {
        mult.validate()?;
        let (r1, r2) = grid.nodes(Side::Frequency);
        let multiplier = r1
            .iter()
            .flat_map(|&a| r2.iter().map(move |&b| mult.eval(a.hypot(b)).re))
            .collect();
        Ok(Self {
            grid: grid.clone(),
            multiplier,
        })
    }

    pub(crate) fn apply(&self, values: &[f64]) -> Vec<f64> {
        let mut fhat = self.grid.apply_real(Side::Space, values);
        for (v, m) in fhat.iter_mut().zip(&self.multiplier) {
            *v *= m;
        }
        self.grid.apply_real(Side::Frequency, &fhat)
    }
}

/// `K_Q` on real node values: `Q^{1/p} R(Q^{1/p} v)`.
pub(crate) struct WeightedOperator {
    resolvent: RealResolvent,
    root: Vec<f64>,
}

impl WeightedOperator {
    pub(crate) fn new(grid: &Arc<BiRadialGrid>, w: &WeightSpec, p: f64, mult: &MultiplierSpec) -> Result<Self> {
        w.validate()?;
        check_exponent(grid.dim(), p)?;
        Ok(Self {
            resolvent: RealResolvent::new(grid, mult)?,
            root: weight_root(grid, w, p),
        })
    }

    pub(crate) fn root(&self) -> &[f64] {
        &self.root
    }

    pub(crate) fn apply(&self, v: &[f64]) -> Vec<f64> {
        if self.root.iter().all(|&q| q == 0.0) {
            return vec![0.0; v.len()];
        }
        let g: Vec<f64> = v.iter().zip(&self.root).map(|(a, q)| a * q).collect();
        let mut u = self.resolvent.apply(&g);
        for (x, q) in u.iter_mut().zip(&self.root) {
            *x *= q;
        }
        u
    }

    pub(crate) fn real_resolvent(&self) -> &RealResolvent {
        &self.resolvent
    }
}

fn require_real_space(v: &BiRadialField) -> Result<()> {
    if v.side != Side::Space || !v.is_real() {
        return domain("K_Q acts on real space-side fields");
    }
    Ok(())
}

/// `K_Q v = Q^{1/p} R(Q^{1/p} v)`.
pub fn apply_kq(v: &BiRadialField, w: &WeightSpec, p: f64, mult: &MultiplierSpec) -> Result<BiRadialField> {
    require_real_space(v)?;
    let op = WeightedOperator::new(&v.grid, w, p, mult)?;
    BiRadialField::from_real(v.grid.clone(), Side::Space, op.apply(&v.real_parts()))
}

/// `∫ v·K_Q w dx`.
pub fn bilinear_form(
    v: &BiRadialField,
    w_field: &BiRadialField,
    w: &WeightSpec,
    p: f64,
    mult: &MultiplierSpec,
) -> Result<f64> {
    require_real_space(v)?;
    let kw = apply_kq(w_field, w, p, mult)?;
    Ok(v.integral_product(&kw)?.re)
}

/// Controls for the radial (fully `O(N)`-symmetric) resolvent path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadialSpec {
    pub eps_ladder: Vec<f64>,
    /// Narrowest panel next to the unit sphere.
    pub panel_floor: f64,
    pub panels_per_wavelength: usize,
    pub order: usize,
}

impl RadialSpec {
    /// Ladder `(4ε, 2ε, ε)` with `ε = 10⁻⁴/max(1, r_max)`, so the third-order
    /// extrapolation error `(ε r)³` stays near round-off up to `r_max`.
    pub fn for_range(r_max: f64) -> Self {
        let eps = 1e-4 / r_max.max(1.0);
        Self {
            eps_ladder: vec![4.0 * eps, 2.0 * eps, eps],
            panel_floor: 0.25 * eps,
            panels_per_wavelength: 8,
            order: 12,
        }
    }
}

/// Radial inverse transform of `m(ρ)·ĝ(ρ)` over `ρ ∈ [1-a, 1+a]` for an
/// input `ĝ` supported there, graded toward the sphere `ρ = 1`.
fn radial_band_integral(
    n: usize,
    half_width: f64,
    ghat: impl Fn(f64) -> f64,
    r_samples: &[f64],
    spec: &RadialSpec,
) -> Vec<Complex64> {
    let r_max = r_samples.iter().fold(0.0f64, |m, &r| m.max(r));
    // offsets d = ρ - 1, symmetric geometric grading
    let mut offsets = vec![0.0];
    let mut x = spec.panel_floor;
    while x < half_width {
        offsets.push(x);
        x *= 2.0;
    }
    offsets.push(half_width);
    let mut breaks: Vec<f64> = offsets.iter().rev().map(|d| -d).collect();
    breaks.extend(offsets.iter().skip(1).copied());
    let breaks = normalize_breaks(breaks, -half_width, half_width);
    let width = 2.0 * PI / (spec.panels_per_wavelength as f64 * r_max.max(1.0));
    let breaks = refine_breaks(&breaks, width);
    let rule = Rule::composite(&breaks, spec.order);
    let c = richardson_weights(&spec.eps_ladder);
    let weights: Vec<(f64, Complex64)> = rule
        .nodes
        .iter()
        .zip(&rule.weights)
        .map(|(&d, &w)| {
            let rho = 1.0 + d;
            let x = d * (2.0 + d);
            let m: Complex64 = c
                .iter()
                .zip(&spec.eps_ladder)
                .map(|(cj, &e)| *cj / Complex64::new(x, -e))
                .sum();
            (rho, m * (w * ghat(rho) * rho.powi(n as i32 - 1)))
        })
        .collect();
    r_samples
        .par_iter()
        .map(|&r| weights.iter().map(|(rho, m)| m * sphere_ft_unchecked(n, r * rho)).sum())
        .collect()
}

/// Smooth even cutoff `ψ̂` with `ψ̂ = 1` for `||ξ| - 1| ≤ inner` and `0`
/// beyond `outer`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CutoffSpec {
    pub inner: f64,
    pub outer: f64,
}

impl Default for CutoffSpec {
    fn default() -> Self {
        Self {
            inner: 1.0 / 6.0,
            outer: 0.25,
        }
    }
}

impl CutoffSpec {
    pub fn eval(&self, rho: f64) -> f64 {
        smooth_step(rho - 1.0, self.inner, self.outer)
    }
}

/// Samples of `Φ = Φ₁ + Φ₂` with `Φ̂₁ = ψ̂ Φ̂`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiSplit {
    pub r: Vec<f64>,
    pub phi: Vec<Complex64>,
    pub phi1: Vec<Complex64>,
    pub phi2: Vec<Complex64>,
}

/// Splits the fundamental solution into its near-sphere frequency part
/// `Φ₁` and the remainder `Φ₂ = Φ - Φ₁` at the given radii.
pub fn split_phi(n: usize, r_samples: &[f64], cutoff: CutoffSpec, spec: &RadialSpec) -> Result<PhiSplit> {
    if !(3..=crate::specfun::N_MAX).contains(&n) {
        return domain(format!("dimension N = {n} outside 3..={}", crate::specfun::N_MAX));
    }
    if r_samples.iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
        return domain("split radii must be positive and finite");
    }
    if !(cutoff.inner > 0.0 && cutoff.outer > cutoff.inner && cutoff.outer < 1.0) {
        return domain("cutoff needs 0 < inner < outer < 1");
    }
    if spec.eps_ladder.is_empty() || spec.eps_ladder.windows(2).any(|w| w[0] <= w[1]) {
        return domain("the ε ladder must be strictly decreasing");
    }
    let scale = (2.0 * PI).powf(-(n as f64) / 2.0);
    let phi1 = radial_band_integral(n, cutoff.outer, |rho| scale * cutoff.eval(rho), r_samples, spec);
    let phi: Vec<Complex64> = r_samples
        .iter()
        .map(|&r| helmholtz_kernel(n, r))
        .collect::<Result<_>>()?;
    let phi2 = phi.iter().zip(&phi1).map(|(a, b)| a - b).collect();
    Ok(PhiSplit {
        r: r_samples.to_vec(),
        phi,
        phi1,
        phi2,
    })
}

/// Outgoing resolvent of a radial source with transform `ĝ`, evaluated at
/// radii `r_samples`. The part of `ĝ` near the sphere uses the ladder of
/// `spec`; the rest is integrated against the exact `1/(ρ² - 1)` up to
/// `xi_max`.
pub fn radial_resolvent(
    n: usize,
    ghat: impl Fn(f64) -> f64 + Sync,
    xi_max: f64,
    r_samples: &[f64],
    spec: &RadialSpec,
) -> Result<Vec<Complex64>> {
    if !(3..=crate::specfun::N_MAX).contains(&n) {
        return domain(format!("dimension N = {n} outside 3..={}", crate::specfun::N_MAX));
    }
    let band = CutoffSpec {
        inner: 0.25,
        outer: 0.5,
    };
    let near = radial_band_integral(n, band.outer, |rho| band.eval(rho) * ghat(rho), r_samples, spec);
    let r_max = r_samples.iter().fold(1.0f64, |m, &r| m.max(r));
    let width = (2.0 * PI / (spec.panels_per_wavelength as f64 * r_max)).min(0.05);
    let breaks = refine_breaks(&[0.0, 1.0 - band.outer, 1.0 + band.outer, xi_max], width);
    let rule = Rule::composite(&breaks, spec.order);
    let far: Vec<(f64, f64)> = rule
        .nodes
        .iter()
        .zip(&rule.weights)
        .filter_map(|(&rho, &w)| {
            let chi = band.eval(rho);
            if chi >= 1.0 {
                return None;
            }
            let x = (rho - 1.0) * (rho + 1.0);
            Some((rho, w * (1.0 - chi) * ghat(rho) * rho.powi(n as i32 - 1) / x))
        })
        .collect();
    Ok(r_samples
        .par_iter()
        .zip(near.par_iter())
        .map(|(&r, &nr)| {
            let f: f64 = far.iter().map(|(rho, m)| m * sphere_ft_unchecked(n, r * rho)).sum();
            nr + f
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn richardson_default_weights() {
        let c = richardson_weights(&[0.1, 0.05, 0.025]);
        assert_relative_eq!(c[0], 1.0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(c[1], -2.0, epsilon = 1e-12);
        assert_relative_eq!(c[2], 8.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn smooth_step_limits() {
        assert_eq!(smooth_step(0.1, 1.0 / 6.0, 0.25), 1.0);
        assert_eq!(smooth_step(-0.3, 1.0 / 6.0, 0.25), 0.0);
        let mid = smooth_step(0.5 * (1.0 / 6.0 + 0.25), 1.0 / 6.0, 0.25);
        assert_relative_eq!(mid, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn multiplier_is_exact_away_from_the_sphere() {
        let m = MultiplierSpec::default();
        for &rho in &[0.0, 0.3, 1.5, 2.0, 7.0] {
            let exact = 1.0 / (rho * rho - 1.0);
            assert_relative_eq!(m.eval(rho).re, exact, epsilon = 1e-14);
            assert_eq!(m.eval(rho).im, 0.0);
        }
    }
}
