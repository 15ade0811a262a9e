//! Dual variational formulation of the nonlinear Helmholtz equation.
//!
//! The dual functional is `J(v) = (1/p')‖v‖_{p'}^{p'} − ½∫ v K_Q v` with
//! `K_Q v = Q^{1/p} R(Q^{1/p} v)` and `R` the real part of the resolvent.
//! Its critical points solve `|v|^{p'−2}v = K_Q v`, and `u = R(Q^{1/p} v)`
//! then solves `u = R(Q|u|^{p−2}u)`.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::geometry::{OrbitBall, ReducedPoint, SymmetryDim, WeightSpec};
use crate::resolvent::{BiRadialField, BiRadialGrid, MultiplierSpec, RealResolvent, Side, WeightedOperator};
use crate::thresholds::{lambda_threshold_ab, selfdual_p_range, stein_tomas_q};

/// Below this `L^p` size a field counts as zero.
const TINY: f64 = 1e-300;

/// Dual exponent `p' = p/(p−1)`.
pub fn conjugate(p: f64) -> f64 {
    p / (p - 1.0)
}

/// The duality map `s ↦ |s|^{r−2}s`.
pub fn duality_map(s: f64, r: f64) -> f64 {
    if s == 0.0 {
        0.0
    } else {
        s.abs().powf(r - 2.0) * s
    }
}

fn lp(measures: &[f64], values: &[f64], p: f64) -> f64 {
    let sum: f64 = measures.iter().zip(values).map(|(m, v)| m * v.abs().powf(p)).sum();
    sum.powf(1.0 / p)
}

fn dot(measures: &[f64], a: &[f64], b: &[f64]) -> f64 {
    measures.iter().zip(a).zip(b).map(|((m, x), y)| m * x * y).sum()
}

/// The discretized functional: `K_Q` together with the space cell measures.
pub(crate) struct Functional {
    grid: Arc<BiRadialGrid>,
    weight: WeightSpec,
    p: f64,
    multiplier: MultiplierSpec,
    operator: WeightedOperator,
    measures: Vec<f64>,
}

impl fmt::Debug for Functional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Functional")
            .field("p", &self.p)
            .field("weight", &self.weight)
            .finish_non_exhaustive()
    }
}

/// Scalars describing `v` against a cached `K_Q v`.
#[derive(Debug, Clone, Copy)]
struct Summary {
    /// `‖v‖_{p'}^{p'}`
    dual_power: f64,
    /// `∫ v K_Q v`
    quadratic: f64,
    energy: f64,
    el_residual: f64,
    trivial: bool,
}

impl Functional {
    fn new(grid: &Arc<BiRadialGrid>, weight: &WeightSpec, p: f64, multiplier: &MultiplierSpec) -> Result<Self> {
        Ok(Self {
            grid: grid.clone(),
            weight: weight.clone(),
            p,
            multiplier: multiplier.clone(),
            operator: WeightedOperator::new(grid, weight, p, multiplier)?,
            measures: grid.measures(Side::Space),
        })
    }

    fn dual(&self) -> f64 {
        conjugate(self.p)
    }

    fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.operator.apply(v)
    }

    fn summarize(&self, v: &[f64], kv: &[f64]) -> Summary {
        let pd = self.dual();
        let dual_power: f64 = self.measures.iter().zip(v).map(|(m, x)| m * x.abs().powf(pd)).sum();
        let quadratic = dot(&self.measures, v, kv);
        let energy = dual_power / pd - 0.5 * quadratic;
        let gap: Vec<f64> = v.iter().zip(kv).map(|(&x, &k)| duality_map(x, pd) - k).collect();
        let num = lp(&self.measures, &gap, self.p);
        let den = lp(&self.measures, kv, self.p);
        let trivial = den <= TINY && num <= TINY;
        let el_residual = if trivial { 0.0 } else { num / den.max(TINY) };
        Summary {
            dual_power,
            quadratic,
            energy,
            el_residual,
            trivial,
        }
    }

    /// `(B(v,v)/‖v‖_{p'}^{p'})^{1/(p'−2)}`.
    fn nehari(&self, s: &Summary) -> Result<f64> {
        if !(s.quadratic > 0.0) || !(s.dual_power > 0.0) {
            return Err(Error::NoScale(s.quadratic));
        }
        Ok((s.quadratic / s.dual_power).powf(1.0 / (self.dual() - 2.0)))
    }
}

/// A candidate dual bound state with its cached image under `K_Q`.
#[derive(Debug, Clone)]
pub struct DualState {
    functional: Arc<Functional>,
    v: Vec<f64>,
    kqv: Vec<f64>,
    summary: Summary,
    q: Option<f64>,
    iterations: usize,
    history: Vec<f64>,
}

impl DualState {
    /// Wraps a real space-side field, computing `K_Q v`, `J(v)` and the
    /// Euler–Lagrange residual.
    pub fn new(v: &BiRadialField, weight: &WeightSpec, p: f64, multiplier: &MultiplierSpec) -> Result<Self> {
        if v.side() != Side::Space || !v.is_real() {
            return domain("dual states are real space-side fields");
        }
        let functional = Arc::new(Functional::new(v.grid(), weight, p, multiplier)?);
        Ok(Self::from_parts(functional, v.real_parts()))
    }

    fn from_parts(functional: Arc<Functional>, v: Vec<f64>) -> Self {
        let kqv = functional.apply(&v);
        Self::with_image(functional, v, kqv)
    }

    fn with_image(functional: Arc<Functional>, v: Vec<f64>, kqv: Vec<f64>) -> Self {
        let summary = functional.summarize(&v, &kqv);
        Self {
            functional,
            v,
            kqv,
            summary,
            q: None,
            iterations: 0,
            history: Vec::new(),
        }
    }

    /// Same functional, new node values; the cache is recomputed.
    pub fn with_values(&self, v: &BiRadialField) -> Result<Self> {
        if !Arc::ptr_eq(v.grid(), &self.functional.grid) || v.side() != Side::Space || !v.is_real() {
            return domain("replacement values must be a real space-side field on the same grid");
        }
        Ok(Self::from_parts(self.functional.clone(), v.real_parts()))
    }

    pub fn grid(&self) -> &Arc<BiRadialGrid> {
        &self.functional.grid
    }

    pub fn v(&self) -> BiRadialField {
        self.field(&self.v)
    }

    pub fn kqv(&self) -> BiRadialField {
        self.field(&self.kqv)
    }

    fn field(&self, values: &[f64]) -> BiRadialField {
        BiRadialField::from_real(self.grid().clone(), Side::Space, values.to_vec())
            .expect("cached values are finite and sized to the grid")
    }

    pub fn p(&self) -> f64 {
        self.functional.p
    }

    /// Extension exponent the run was certified with, if any.
    pub fn q(&self) -> Option<f64> {
        self.q
    }

    pub fn weight(&self) -> &WeightSpec {
        &self.functional.weight
    }

    pub fn multiplier(&self) -> &MultiplierSpec {
        &self.functional.multiplier
    }

    pub fn energy(&self) -> f64 {
        self.summary.energy
    }

    pub fn el_residual(&self) -> f64 {
        self.summary.el_residual
    }

    /// `true` when both `v` and `K_Q v` vanish.
    pub fn is_trivial(&self) -> bool {
        self.summary.trivial
    }

    /// `‖v‖_{p'}`.
    pub fn dual_norm(&self) -> f64 {
        self.summary.dual_power.powf(1.0 / self.functional.dual())
    }

    /// `∫ v K_Q v`.
    pub fn quadratic_form(&self) -> f64 {
        self.summary.quadratic
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Euler–Lagrange residual after every accepted iteration.
    pub fn history(&self) -> &[f64] {
        &self.history
    }

    /// `J'(v)w = ∫(|v|^{p'−2}v − K_Q v) w`.
    pub fn directional_derivative(&self, direction: &BiRadialField) -> Result<f64> {
        if !Arc::ptr_eq(direction.grid(), self.grid()) || direction.side() != Side::Space || !direction.is_real() {
            return domain("directions must be real space-side fields on the state's grid");
        }
        let pd = self.functional.dual();
        let gradient: Vec<f64> = self
            .v
            .iter()
            .zip(&self.kqv)
            .map(|(&x, &k)| duality_map(x, pd) - k)
            .collect();
        Ok(dot(&self.functional.measures, &gradient, &direction.real_parts()))
    }
}

/// `J(v)`.
pub fn energy(state: &DualState) -> f64 {
    state.energy()
}

/// `‖|v|^{p'−2}v − K_Q v‖_p / ‖K_Q v‖_p`, zero for the trivial state.
pub fn el_residual(state: &DualState) -> f64 {
    state.el_residual()
}

/// The `t > 0` maximizing `J(tv)`.
pub fn nehari_scale(v: &BiRadialField, weight: &WeightSpec, p: f64, multiplier: &MultiplierSpec) -> Result<f64> {
    let state = DualState::new(v, weight, p, multiplier)?;
    state.functional.nehari(&state.summary)
}

/// Iteration controls for [`solve_bound_state`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub max_iter: usize,
    pub residual_tol: f64,
    pub seed: u64,
    /// Largest blend weight toward the fixed-point image, in `(0, 1]`.
    pub damping: f64,
    pub multiplier: MultiplierSpec,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iter: 2000,
            residual_tol: 1e-4,
            seed: 0,
            damping: 1.0,
            multiplier: MultiplierSpec::default(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return domain("max_iter must be positive");
        }
        if !(self.residual_tol > 0.0) || !self.residual_tol.is_finite() {
            return domain(format!("residual_tol must be positive, got {}", self.residual_tol));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return domain(format!("damping must lie in (0, 1], got {}", self.damping));
        }
        self.multiplier.validate()
    }
}

/// Checks that `(G_k, q, Q^{1/p})` is admissible and that `p` lies in the
/// self-dual window for `q`.
pub fn check_exponents(dim: SymmetryDim, weight: &WeightSpec, p: f64, q: f64) -> Result<()> {
    let n = dim.n();
    let st = stein_tomas_q::<f64>(n)?;
    let window = selfdual_p_range(n, q)?;
    let upper = 2.0 * n as f64 / (n as f64 - 2.0);
    if !(p > window.lower.max(2.0) && p < upper) {
        return domain(format!(
            "p = {p} lies outside ({}, {upper}) for q = {q}",
            window.lower.max(2.0)
        ));
    }
    let admissible = match weight {
        // The Stein–Tomas exponent works for every bounded weight.
        _ if q == st => true,
        WeightSpec::PowerLayer { alpha, beta, .. } => {
            let lambda = lambda_threshold_ab(n, dim.k(), *alpha, *beta)?;
            lambda.valid && q > lambda.value
        }
        // Bounded with compact support: the extension is bounded pointwise.
        WeightSpec::Sampled(_) => true,
    };
    if !admissible {
        return domain(format!("q = {q} is not admissible for this weight"));
    }
    Ok(())
}

/// Grid node where a Gaussian-smoothed copy of `Q` is largest.
fn bulk_center(grid: &BiRadialGrid, weight: &WeightSpec, width: f64) -> ReducedPoint {
    let (ts, ss) = grid.nodes(Side::Space);
    let stride_t = ts.len().div_ceil(48).max(1);
    let stride_s = ss.len().div_ceil(48).max(1);
    let q: Vec<f64> = ts
        .iter()
        .flat_map(|&t| ss.iter().map(move |&s| weight.eval(ReducedPoint::new(t, s))))
        .collect();
    let candidates: Vec<(usize, usize)> = (0..ts.len())
        .step_by(stride_t)
        .flat_map(|i| (0..ss.len()).step_by(stride_s).map(move |j| (i, j)))
        .collect();
    let score = |&(ci, cj): &(usize, usize)| -> f64 {
        let mut total = 0.0;
        for (i, &t) in ts.iter().enumerate() {
            let dt = (t - ts[ci]) / width;
            if dt.abs() > 4.0 {
                continue;
            }
            for (j, &s) in ss.iter().enumerate() {
                let ds = (s - ss[cj]) / width;
                if ds.abs() <= 4.0 {
                    total += q[i * ss.len() + j] * (-0.5 * (dt * dt + ds * ds)).exp();
                }
            }
        }
        total
    };
    let scores: Vec<f64> = candidates.par_iter().map(score).collect();
    let best = scores
        .iter()
        .enumerate()
        .fold(0, |b, (i, &x)| if x > scores[b] { i } else { b });
    let (i, j) = candidates[best];
    ReducedPoint::new(ts[i], ss[j])
}

fn initial_bump(functional: &Functional, center: ReducedPoint, width: f64) -> Vec<f64> {
    let (ts, ss) = functional.grid.nodes(Side::Space);
    let root = functional.operator.root();
    ts.iter()
        .flat_map(|&t| ss.iter().map(move |&s| (t, s)))
        .zip(root)
        .map(|((t, s), q)| {
            let r2 = (t - center.t).powi(2) + (s - center.s).powi(2);
            q * (-0.5 * r2 / (width * width)).exp()
        })
        .collect()
}

/// Starting point for one attempt: a bump near the bulk of `Q`, scaled onto
/// the Nehari manifold. Narrows the bump until its quadratic form is positive.
fn start(functional: &Arc<Functional>, base: ReducedPoint, rng: &mut ChaCha8Rng) -> Result<DualState> {
    let mut width = rng.gen_range(0.4..0.6);
    let center = ReducedPoint::new(
        (base.t + rng.gen_range(-0.25..0.25) * width).max(0.0),
        (base.s + rng.gen_range(-0.25..0.25) * width).max(0.0),
    );
    let mut last = 0.0;
    for _ in 0..6 {
        let v = initial_bump(functional, center, width);
        let state = DualState::from_parts(functional.clone(), v);
        last = state.summary.quadratic;
        if let Ok(t) = functional.nehari(&state.summary) {
            let v: Vec<f64> = state.v.iter().map(|x| t * x).collect();
            let kv: Vec<f64> = state.kqv.iter().map(|x| t * x).collect();
            return Ok(DualState::with_image(functional.clone(), v, kv));
        }
        width *= 0.5;
    }
    Err(Error::NoScale(last))
}

enum Outcome {
    Converged(DualState),
    Collapsed,
    Stalled(DualState),
}

fn iterate(functional: &Arc<Functional>, mut state: DualState, config: &SolverConfig) -> Outcome {
    let p = functional.p;
    let pd = functional.dual();
    let initial_norm = state.dual_norm();
    let mut damping = config.damping;
    state.history.push(state.el_residual());
    let mut steps = 0;
    while steps < config.max_iter {
        if state.el_residual() <= config.residual_tol {
            return Outcome::Converged(state);
        }
        steps += 1;
        let image: Vec<f64> = state.kqv.iter().map(|&k| duality_map(k, p)).collect();
        let image_norm = lp(&functional.measures, &image, pd);
        if image_norm <= TINY {
            return Outcome::Collapsed;
        }
        let match_scale = state.dual_norm() / image_norm;
        let blend: Vec<f64> = state
            .v
            .iter()
            .zip(&image)
            .map(|(&v, &w)| (1.0 - damping) * v + damping * match_scale * w)
            .collect();
        let kblend = functional.apply(&blend);
        let summary = functional.summarize(&blend, &kblend);
        let accepted = functional.nehari(&summary).ok().map(|t| {
            let v: Vec<f64> = blend.iter().map(|x| t * x).collect();
            let kv: Vec<f64> = kblend.iter().map(|x| t * x).collect();
            DualState::with_image(functional.clone(), v, kv)
        });
        match accepted {
            Some(next) if next.el_residual() <= 1.1 * state.el_residual() => {
                if next.dual_norm() < 1e-8 * initial_norm {
                    return Outcome::Collapsed;
                }
                let history = std::mem::take(&mut state.history);
                let iterations = state.iterations + 1;
                state = next;
                state.history = history;
                state.history.push(state.el_residual());
                state.iterations = iterations;
                damping = (damping * 1.25).min(config.damping);
            }
            _ => {
                damping *= 0.5;
                if damping < 1e-6 {
                    break;
                }
            }
        }
    }
    if state.el_residual() <= config.residual_tol {
        Outcome::Converged(state)
    } else {
        Outcome::Stalled(state)
    }
}

/// Finds a nontrivial solution of `|v|^{p'−2}v = K_Q v` by damped
/// fixed-point iteration with Nehari rescaling.
///
/// `q` is the extension exponent certifying the run; it is checked against
/// the weight and `p` and recorded on the returned state.
pub fn solve_bound_state(
    grid: &Arc<BiRadialGrid>,
    weight: &WeightSpec,
    p: f64,
    q: f64,
    config: &SolverConfig,
) -> Result<DualState> {
    config.validate()?;
    weight.validate()?;
    check_exponents(grid.dim(), weight, p, q)?;
    let functional = Arc::new(Functional::new(grid, weight, p, &config.multiplier)?);
    if functional.operator.root().iter().all(|&x| x == 0.0) {
        return Err(Error::TrivialOnly("the weight vanishes on the grid, so K_Q = 0".into()));
    }
    let base = bulk_center(grid, weight, 0.5);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut history = Vec::new();
    for _restart in 0..4 {
        let initial = start(&functional, base, &mut rng)?;
        match iterate(&functional, initial, config) {
            Outcome::Converged(mut state) => {
                state.q = Some(q);
                return Ok(state);
            }
            Outcome::Collapsed => continue,
            Outcome::Stalled(state) => {
                history = state.history;
                break;
            }
        }
    }
    let residual = history.last().copied().unwrap_or(f64::INFINITY);
    Err(Error::NonConvergence {
        iterations: history.len().saturating_sub(1),
        residual,
        history,
    })
}

/// `u = R(Q^{1/p} v)` and the residual of `u = R(Q|u|^{p−2}u)`.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub u: BiRadialField,
    /// `‖u − R(Q|u|^{p−2}u)‖_p / ‖u‖_p`, zero for `u = 0`.
    pub residual: f64,
}

pub fn reconstruct_u(state: &DualState, multiplier: &MultiplierSpec) -> Result<Reconstruction> {
    let functional = &state.functional;
    let grid = functional.grid.clone();
    let fresh;
    let resolvent = if multiplier == &functional.multiplier {
        functional.operator.real_resolvent()
    } else {
        fresh = RealResolvent::new(&grid, multiplier)?;
        &fresh
    };
    let root = functional.operator.root();
    let p = functional.p;
    let g: Vec<f64> = state.v.iter().zip(root).map(|(v, q)| v * q).collect();
    let u = resolvent.apply(&g);
    // Q|u|^{p−2}u with Q = (Q^{1/p})^p
    let source: Vec<f64> = u
        .iter()
        .zip(root)
        .map(|(&x, &q)| q.powf(p) * duality_map(x, p))
        .collect();
    let again = resolvent.apply(&source);
    let diff: Vec<f64> = u.iter().zip(&again).map(|(a, b)| a - b).collect();
    let norm = lp(&functional.measures, &u, p);
    let residual = if norm <= TINY {
        0.0
    } else {
        lp(&functional.measures, &diff, p) / norm
    };
    Ok(Reconstruction {
        u: BiRadialField::from_real(grid, Side::Space, u)?,
        residual,
    })
}

/// Ball with the largest `∫_{B_R(x)} |Q^{1/p} v|^{p'} dx` over grid centers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Concentration {
    pub center: ReducedPoint,
    pub mass: f64,
}

pub fn concentration(state: &DualState, radius: f64) -> Result<Concentration> {
    if !(radius > 0.0) || !radius.is_finite() {
        return domain(format!("ball radius must be positive, got {radius}"));
    }
    let functional = &state.functional;
    let grid = &functional.grid;
    let pd = functional.dual();
    let (ts, ss) = grid.nodes(Side::Space);
    let (nt, ns) = (ts.len(), ss.len());
    let density: Vec<f64> = state
        .v
        .iter()
        .zip(functional.operator.root())
        .zip(&functional.measures)
        .map(|((v, q), m)| m * (v * q).abs().powf(pd))
        .collect();
    let ball = OrbitBall::new(grid.dim(), 24);
    let r2 = radius * radius;
    let window = |nodes: &[f64], c: f64| {
        let lo = nodes.partition_point(|&x| x < c - radius);
        let hi = nodes.partition_point(|&x| x <= c + radius);
        lo..hi
    };
    let mass_at = |i: usize, j: usize| -> f64 {
        let center = ReducedPoint::new(ts[i], ss[j]);
        let mut total = 0.0;
        for a in window(ts, center.t) {
            for b in window(ss, center.s) {
                let d = density[a * ns + b];
                if d > 0.0 {
                    total += d * ball.fraction(center, ReducedPoint::new(ts[a], ss[b]), r2);
                }
            }
        }
        total
    };
    let best_of = |cands: Vec<(usize, usize)>| -> ((usize, usize), f64) {
        let masses: Vec<f64> = cands.par_iter().map(|&(i, j)| mass_at(i, j)).collect();
        // first maximum in candidate order, independent of scheduling
        cands
            .into_iter()
            .zip(masses)
            .fold(((0, 0), -1.0), |a, b| if b.1 > a.1 { b } else { a })
    };
    let stride_t = nt.div_ceil(40).max(1);
    let stride_s = ns.div_ceil(40).max(1);
    let coarse: Vec<(usize, usize)> = (0..nt)
        .step_by(stride_t)
        .flat_map(|i| (0..ns).step_by(stride_s).map(move |j| (i, j)))
        .collect();
    let ((ci, cj), _) = best_of(coarse);
    let fine: Vec<(usize, usize)> = (ci.saturating_sub(stride_t)..(ci + stride_t + 1).min(nt))
        .flat_map(|i| (cj.saturating_sub(stride_s)..(cj + stride_s + 1).min(ns)).map(move |j| (i, j)))
        .collect();
    let ((i, j), mass) = best_of(fine);
    Ok(Concentration {
        center: ReducedPoint::new(ts[i], ss[j]),
        mass: mass.max(0.0),
    })
}
