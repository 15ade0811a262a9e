//! Experiment parameters, one JSON object per subcommand. Unknown keys and
//! missing required keys are rejected before any computation starts.

use std::path::PathBuf;

use serde::Deserialize;
use shl_core::dualvar::SolverConfig;
use shl_core::extension::QuadratureSpec;
use shl_core::geometry::{SymmetryDim, WeightSpec};

use crate::output::Failure;

fn one() -> f64 {
    1.0
}

fn default_seed() -> u64 {
    0
}

fn check(ok: bool, msg: impl Into<String>) -> Result<(), Failure> {
    if ok {
        Ok(())
    } else {
        Err(Failure::Config(msg.into()))
    }
}

fn symmetry(n: usize, k: usize) -> Result<SymmetryDim, Failure> {
    SymmetryDim::new(n, k).map_err(|e| Failure::Config(e.to_string()))
}

/// Decay and Wronskian checks of the special functions.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecfunParams {
    /// Largest sphere dimension `m` in the decay check.
    #[serde(default = "SpecfunParams::max_dim")]
    pub max_dim: usize,
    #[serde(default = "SpecfunParams::r_max")]
    pub r_max: f64,
    /// Radius of the reference window `[0, r_near]`.
    #[serde(default = "SpecfunParams::r_near")]
    pub r_near: f64,
    #[serde(default = "SpecfunParams::samples")]
    pub samples: usize,
    #[serde(default = "SpecfunParams::wronskian_points")]
    pub wronskian_points: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
}

impl SpecfunParams {
    fn max_dim() -> usize {
        8
    }
    fn r_max() -> f64 {
        1e4
    }
    fn r_near() -> f64 {
        100.0
    }
    fn samples() -> usize {
        1_000_000
    }
    fn wronskian_points() -> usize {
        100
    }

    pub fn validate(&self) -> Result<(), Failure> {
        check(
            (2..=shl_core::specfun::N_MAX).contains(&self.max_dim),
            "max_dim must lie in 2..=26",
        )?;
        check(self.r_near > 0.0 && self.r_max > self.r_near, "need 0 < r_near < r_max")?;
        check(self.samples >= 10, "samples must be at least 10")
    }
}

/// Reduced extension formula against direct sphere quadrature.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtensionParams {
    #[serde(rename = "N")]
    pub n: usize,
    pub k: usize,
    #[serde(default = "ExtensionParams::points")]
    pub points: usize,
    /// Reduced coordinates are drawn from `[0, extent]²`.
    #[serde(default = "ExtensionParams::extent")]
    pub extent: f64,
    #[serde(default = "ExtensionParams::tol")]
    pub tol: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub quadrature: QuadratureSpec,
    pub output_dir: Option<PathBuf>,
}

impl ExtensionParams {
    fn points() -> usize {
        20
    }
    fn extent() -> f64 {
        20.0
    }
    fn tol() -> f64 {
        1e-6
    }

    pub fn validate(&self) -> Result<SymmetryDim, Failure> {
        let dim = symmetry(self.n, self.k)?;
        check(self.n <= 4, "the direct oracle supports N ≤ 4")?;
        check(self.extent > 0.0 && self.tol > 0.0, "extent and tol must be positive")?;
        self.quadrature.validate().map_err(|e| Failure::Config(e.to_string()))?;
        Ok(dim)
    }
}

fn layer_weight(alpha: f64, beta: Option<f64>, a: f64, cap: f64) -> Result<WeightSpec, Failure> {
    WeightSpec::power_layer(alpha, beta.unwrap_or(alpha), a, cap).map_err(|e| Failure::Config(e.to_string()))
}

/// Ratios `‖Q ďF_σ‖_q/‖F‖₂` over a family of thin bands.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanParams {
    #[serde(rename = "N")]
    pub n: usize,
    pub k: usize,
    /// Layer exponents; `beta` defaults to `alpha`.
    pub alpha: f64,
    pub beta: Option<f64>,
    #[serde(default = "one")]
    pub a: f64,
    #[serde(default = "one")]
    pub cap: f64,
    pub q_list: Vec<f64>,
    #[serde(default = "ScanParams::deltas")]
    pub deltas: Vec<f64>,
    #[serde(default = "ScanParams::trunc")]
    pub trunc: f64,
    #[serde(default)]
    pub quadrature: QuadratureSpec,
    /// Largest allowed ratio spread for exponents above the threshold.
    #[serde(default = "ScanParams::spread_tol")]
    pub spread_tol: f64,
    pub output_dir: Option<PathBuf>,
}

impl ScanParams {
    fn deltas() -> Vec<f64> {
        (1..=7).map(|i| 0.5f64.powi(i)).collect()
    }
    fn trunc() -> f64 {
        40.0
    }
    fn spread_tol() -> f64 {
        0.25
    }

    pub fn validate(&self) -> Result<(SymmetryDim, WeightSpec), Failure> {
        let dim = symmetry(self.n, self.k)?;
        let w = layer_weight(self.alpha, self.beta, self.a, self.cap)?;
        check(self.q_list.iter().all(|&q| q >= 1.0), "every q must be ≥ 1")?;
        check(
            self.deltas.iter().all(|&d| d > 0.0 && d <= 1.0),
            "every delta must lie in (0, 1]",
        )?;
        check(self.trunc > 0.0, "trunc must be positive")?;
        self.quadrature.validate().map_err(|e| Failure::Config(e.to_string()))?;
        Ok((dim, w))
    }
}

/// Threshold table over an `α` lattice.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdParams {
    #[serde(rename = "N")]
    pub n: usize,
    pub k: usize,
    /// Explicit exponents; otherwise `steps` points spaced evenly on
    /// `[alpha_min, alpha_max]`.
    pub alphas: Option<Vec<f64>>,
    #[serde(default = "ThresholdParams::alpha_min")]
    pub alpha_min: f64,
    #[serde(default = "ThresholdParams::alpha_max")]
    pub alpha_max: f64,
    #[serde(default = "ThresholdParams::steps")]
    pub steps: usize,
    /// Second exponent for the two-exponent layer, `β ≤ α`.
    pub beta: Option<f64>,
    pub output_dir: Option<PathBuf>,
}

impl ThresholdParams {
    fn alpha_min() -> f64 {
        0.05
    }
    fn alpha_max() -> f64 {
        5.0
    }
    fn steps() -> usize {
        100
    }

    pub fn validate(&self) -> Result<Vec<f64>, Failure> {
        symmetry(self.n, self.k)?;
        let alphas = match &self.alphas {
            Some(list) => list.clone(),
            None => {
                check(self.steps >= 2, "steps must be at least 2")?;
                check(
                    self.alpha_min > 0.0 && self.alpha_max > self.alpha_min,
                    "need 0 < alpha_min < alpha_max",
                )?;
                (0..self.steps)
                    .map(|i| self.alpha_min + (self.alpha_max - self.alpha_min) * i as f64 / (self.steps - 1) as f64)
                    .collect()
            }
        };
        check(
            alphas.iter().all(|&a| a > 0.0 && a.is_finite()),
            "every alpha must be positive",
        )?;
        if let Some(b) = self.beta {
            check(b > 0.0, "beta must be positive")?;
            check(alphas.iter().all(|&a| b <= a), "beta must not exceed any alpha")?;
        }
        Ok(alphas)
    }
}

/// Mollified point source against the outgoing fundamental solution.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResolventParams {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(default = "ResolventParams::sigma")]
    pub sigma: f64,
    #[serde(default = "ResolventParams::r_values")]
    pub r_values: Vec<f64>,
    #[serde(default = "ResolventParams::tol")]
    pub tol: f64,
    /// Largest radius of the split diagnostics.
    #[serde(default = "ResolventParams::split_r_max")]
    pub split_r_max: f64,
    pub output_dir: Option<PathBuf>,
}

impl ResolventParams {
    fn sigma() -> f64 {
        0.1
    }
    fn r_values() -> Vec<f64> {
        vec![1.0, 2.0, 5.0]
    }
    fn tol() -> f64 {
        0.01
    }
    fn split_r_max() -> f64 {
        100.0
    }

    pub fn validate(&self) -> Result<(), Failure> {
        check((3..=shl_core::specfun::N_MAX).contains(&self.n), "N must lie in 3..=26")?;
        check(self.sigma > 0.0 && self.sigma < 1.0, "sigma must lie in (0, 1)")?;
        check(
            !self.r_values.is_empty() && self.r_values.iter().all(|&r| r > 0.0),
            "r_values must be positive",
        )?;
        check(self.split_r_max > 1.0, "split_r_max must exceed 1")
    }
}

/// Space and frequency extents of the solver grid.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridParams {
    pub t_max: f64,
    pub xi_max: f64,
    pub space_width: f64,
    pub fine_width: f64,
}

impl Default for GridParams {
    fn default() -> Self {
        Self {
            t_max: 8.0,
            xi_max: 6.0,
            space_width: 0.5,
            fine_width: 0.02,
        }
    }
}

/// Dual bound state of the nonlinear Helmholtz equation.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveParams {
    #[serde(rename = "N")]
    pub n: usize,
    pub k: usize,
    /// Layer exponents; `beta` defaults to `alpha`.
    pub alpha: f64,
    pub beta: Option<f64>,
    #[serde(default = "one")]
    pub a: f64,
    #[serde(default = "one")]
    pub cap: f64,
    pub p: f64,
    pub q: f64,
    #[serde(default)]
    pub grid: GridParams,
    #[serde(default)]
    pub solver: SolverConfig,
    /// Ball radius of the concentration diagnostic.
    #[serde(default = "one")]
    pub radius: f64,
    pub output_dir: Option<PathBuf>,
}

impl SolveParams {
    pub fn validate(&self) -> Result<(SymmetryDim, WeightSpec), Failure> {
        let dim = symmetry(self.n, self.k)?;
        let w = layer_weight(self.alpha, self.beta, self.a, self.cap)?;
        let g = &self.grid;
        check(
            g.t_max > 2.0 && g.xi_max > 2.0 && g.space_width > 0.0 && g.fine_width > 0.0,
            "grid extents must exceed 2 and widths must be positive",
        )?;
        check(self.radius > 0.0, "radius must be positive")?;
        self.solver.validate().map_err(|e| Failure::Config(e.to_string()))?;
        shl_core::dualvar::check_exponents(dim, &w, self.p, self.q).map_err(|e| Failure::Config(e.to_string()))?;
        Ok((dim, w))
    }
}
