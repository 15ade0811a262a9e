//! The six experiments. Each returns a [`Report`] whose status reflects its
//! own checks; hard errors propagate as [`Failure`].

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;
use shl_core::dualvar::{concentration, reconstruct_u, solve_bound_state};
use shl_core::extension::{admissibility_scan, band_profile, extend_direct, Extender, SphereProfile};
use shl_core::geometry::ReducedPoint;
use shl_core::io::write_field;
use shl_core::resolvent::{radial_resolvent, split_phi, BiRadialField, BiRadialGrid, CutoffSpec, GridSpec, RadialSpec};
use shl_core::specfun::{bessel_j, bessel_y, helmholtz_kernel, sphere_ft, Order, MAX_TWICE_NU};
use shl_core::thresholds::{lambda_threshold_ab, stein_tomas_q, threshold_table};

use crate::config::{ExtensionParams, ResolventParams, ScanParams, SolveParams, SpecfunParams, ThresholdParams};
use crate::output::{csv_bytes, Failure, Report, Status};
use crate::svg::{Plot, Series};

fn fmt(x: f64) -> String {
    x.to_string()
}

/// Log-spaced samples on `[lo, hi]`.
fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect()
}

// ---------------------------------------------------------------- specfun

/// `(J'_ν, Y'_ν)` by the lowering recurrence.
fn bessel_slopes(twice: u32, x: f64) -> Result<(f64, f64), Failure> {
    let ord = |t| Order::from_twice(t);
    let nu = twice as f64 / 2.0;
    let j = bessel_j(ord(twice)?, x)?;
    let y = bessel_y(ord(twice)?, x)?;
    Ok(match twice {
        0 => (-bessel_j(ord(2)?, x)?, -bessel_y(ord(2)?, x)?),
        1 => {
            let a = (2.0 / (PI * x)).sqrt();
            (a * x.cos() - nu / x * j, a * x.sin() - nu / x * y)
        }
        _ => (
            bessel_j(ord(twice - 2)?, x)? - nu / x * j,
            bessel_y(ord(twice - 2)?, x)? - nu / x * y,
        ),
    })
}

pub fn verify_specfun(cfg: &SpecfunParams) -> Result<Report, Failure> {
    let dims: Vec<usize> = (2..=cfg.max_dim).collect();
    let rows: Vec<(usize, f64, f64)> = dims
        .par_iter()
        .map(|&m| -> Result<_, Failure> {
            let weighted = |r: f64| -> Result<f64, Failure> {
                Ok((1.0 + r).powf((m as f64 - 1.0) / 2.0) * sphere_ft(m, r)?.abs())
            };
            let (mut near, mut far) = (0.0f64, 0.0f64);
            for i in 0..=cfg.samples {
                let r = cfg.r_max * i as f64 / cfg.samples as f64;
                let v = weighted(r)?;
                far = far.max(v);
                if r <= cfg.r_near {
                    near = near.max(v);
                }
            }
            let fine = 100_000;
            for i in 0..=fine {
                near = near.max(weighted(cfg.r_near * i as f64 / fine as f64)?);
            }
            Ok((m, near, far))
        })
        .collect::<Result<_, _>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut wronskian = Vec::with_capacity(cfg.wronskian_points);
    for _ in 0..cfg.wronskian_points {
        let twice = rng.gen_range(0..=MAX_TWICE_NU);
        let x = 10f64.powf(rng.gen_range(-1.0..500f64.log10()));
        let (dj, dy) = bessel_slopes(twice, x)?;
        let w = bessel_j(Order::from_twice(twice)?, x)? * dy - dj * bessel_y(Order::from_twice(twice)?, x)?;
        wronskian.push((twice as f64 / 2.0, x, (w * PI * x / 2.0 - 1.0).abs()));
    }
    let wronskian_max = wronskian.iter().map(|r| r.2).fold(0.0, f64::max);
    let decay_ok = rows.iter().all(|&(_, near, far)| far.is_finite() && far <= 2.0 * near);
    let wronskian_ok = wronskian_max < 1e-9;

    let mut report = Report::new(
        Status::from_checks(decay_ok && wronskian_ok),
        json!({
            "decay_ok": decay_ok,
            "wronskian_ok": wronskian_ok,
            "wronskian_max_rel_err": wronskian_max,
            "worst_decay_ratio": rows.iter().map(|r| r.2 / r.1).fold(0.0, f64::max),
        }),
    );
    report.add(
        "decay.csv",
        csv_bytes(
            &["m", "near_sup", "far_sup", "ratio"],
            rows.iter()
                .map(|&(m, a, b)| vec![m.to_string(), fmt(a), fmt(b), fmt(b / a)]),
        )?,
    );
    report.add(
        "wronskian.csv",
        csv_bytes(
            &["nu", "x", "rel_err"],
            wronskian.iter().map(|&(nu, x, e)| vec![fmt(nu), fmt(x), fmt(e)]),
        )?,
    );
    let radii = log_space(0.1, cfg.r_max, 400);
    let series = dims
        .iter()
        .map(|&m| {
            let pts = radii
                .iter()
                .filter_map(|&r| {
                    let v = sphere_ft(m, r).ok()?.abs() * (1.0 + r).powf((m as f64 - 1.0) / 2.0);
                    Some((r, v))
                })
                .collect();
            Series::new(format!("m = {m}"), pts)
        })
        .collect();
    let plot = Plot {
        title: "Weighted sphere transform".into(),
        x_label: "r".into(),
        y_label: "(1+r)^((m-1)/2) |transform|".into(),
        log_x: true,
        series,
        ..Default::default()
    };
    report.add("plot.svg", plot.render().into_bytes());
    Ok(report)
}

// ---------------------------------------------------------------- extension

/// Random complex cosine series `Σ c_j cos(jπr)` on `[0, 1]`.
struct CosSeries(Vec<Complex64>);

impl CosSeries {
    fn random(rng: &mut ChaCha8Rng) -> Self {
        Self(
            (0..5)
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect(),
        )
    }

    fn value(&self, r: f64) -> Complex64 {
        self.0
            .iter()
            .enumerate()
            .map(|(j, c)| c * (j as f64 * PI * r).cos())
            .sum()
    }

    fn slope(&self, r: f64) -> Complex64 {
        self.0
            .iter()
            .enumerate()
            .map(|(j, c)| -c * (j as f64 * PI) * (j as f64 * PI * r).sin())
            .sum()
    }

    /// Cubic Hermite profile with exact slopes. The end panels, which are
    /// interpolated linearly, are shrunk to width `1e-6`.
    fn profile(&self, n: usize) -> Result<SphereProfile, Failure> {
        let edge = 1e-6;
        let mut nodes: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
        nodes.insert(1, edge);
        nodes.insert(n + 1, 1.0 - edge);
        let values = nodes.iter().map(|&r| self.value(r)).collect();
        let slopes = nodes.iter().map(|&r| self.slope(r)).collect();
        Ok(SphereProfile::hermite(nodes, values, slopes)?)
    }
}

fn unit_vector(rng: &mut ChaCha8Rng, m: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.1 && norm <= 1.0 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

pub fn verify_extension(cfg: &ExtensionParams) -> Result<Report, Failure> {
    let dim = cfg.validate()?;
    let (n, k) = (dim.n(), dim.k());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let series = CosSeries::random(&mut rng);
    let h = series.profile(2000)?;
    let ext = Extender::new(dim, &h, cfg.quadrature)?;
    let lift = |w: &[f64]| series.value(w[..n - k].iter().map(|v| v * v).sum::<f64>().sqrt());
    let mut rows = vec![];
    for _ in 0..cfg.points {
        let pt = ReducedPoint::new(rng.gen_range(0.0..cfg.extent), rng.gen_range(0.0..cfg.extent));
        let mut x: Vec<f64> = unit_vector(&mut rng, n - k).iter().map(|v| v * pt.t).collect();
        x.extend(unit_vector(&mut rng, k).iter().map(|v| v * pt.s));
        let reduced = ext.eval(pt)?;
        let direct = extend_direct(lift, &x, 1e-9)?;
        let err = (reduced - direct).norm() / direct.norm().max(1e-3);
        rows.push((pt, reduced, direct, err));
    }
    let worst = rows.iter().map(|r| r.3).fold(0.0, f64::max);
    let ok = worst <= cfg.tol;
    let mut report = Report::new(
        Status::from_checks(ok),
        json!({ "N": n, "k": k, "points": cfg.points, "max_rel_err": worst, "tol": cfg.tol }),
    );
    report.add(
        "extension.csv",
        csv_bytes(
            &[
                "t",
                "s",
                "reduced_re",
                "reduced_im",
                "direct_re",
                "direct_im",
                "rel_err",
            ],
            rows.iter().map(|(pt, a, b, e)| {
                vec![
                    fmt(pt.t),
                    fmt(pt.s),
                    fmt(a.re),
                    fmt(a.im),
                    fmt(b.re),
                    fmt(b.im),
                    fmt(*e),
                ]
            }),
        )?,
    );
    let mut sorted: Vec<(f64, f64)> = rows.iter().map(|(pt, _, _, e)| (pt.norm(), e.max(1e-17))).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let plot = Plot {
        title: format!("Reduced against direct extension, N = {n}, k = {k}"),
        x_label: "|x|".into(),
        y_label: "relative error".into(),
        log_y: true,
        series: vec![
            Series::new("error", sorted.clone()),
            Series::new(
                "tolerance",
                vec![(sorted[0].0, cfg.tol), (sorted[sorted.len() - 1].0, cfg.tol)],
            ),
        ],
        ..Default::default()
    };
    report.add("plot.svg", plot.render().into_bytes());
    Ok(report)
}

// ---------------------------------------------------------------- scan

pub fn scan_admissibility(cfg: &ScanParams) -> Result<Report, Failure> {
    let (dim, w) = cfg.validate()?;
    let family: Vec<(f64, SphereProfile)> = cfg
        .deltas
        .iter()
        .map(|&d| Ok((d, band_profile(d)?)))
        .collect::<Result<_, Failure>>()?;
    let rows = admissibility_scan(dim, &w, &cfg.q_list, &family, cfg.trunc, cfg.quadrature)?;
    let threshold = lambda_threshold_ab(dim.n(), dim.k(), cfg.alpha, cfg.beta.unwrap_or(cfg.alpha))?;
    let st = stein_tomas_q::<f64>(dim.n())?;
    let mut per_q = vec![];
    let mut ok = true;
    for &q in &cfg.q_list {
        let ratios: Vec<f64> = rows.iter().filter(|r| r.q == q).map(|r| r.ratio).collect();
        let (lo, hi) = ratios
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(a, b), &r| (a.min(r), b.max(r)));
        let spread = hi / lo;
        let admissible = q == st || (threshold.valid && q > threshold.value);
        let bounded = spread <= 1.0 + cfg.spread_tol;
        if admissible && !bounded {
            ok = false;
        }
        per_q.push(json!({ "q": q, "admissible": admissible, "spread": spread, "bounded": bounded }));
    }
    let mut report = Report::new(
        Status::from_checks(ok),
        json!({
            "lambda": threshold.value,
            "lambda_valid": threshold.valid,
            "stein_tomas_q": st,
            "exponents": per_q,
        }),
    );
    report.add(
        "scan.csv",
        csv_bytes(
            &["q", "param", "norm_q", "norm_2", "ratio", "tail_ok"],
            rows.iter().map(|r| {
                vec![
                    fmt(r.q),
                    fmt(r.param),
                    fmt(r.norm_q),
                    fmt(r.norm_2),
                    fmt(r.ratio),
                    r.tail_ok.to_string(),
                ]
            }),
        )?,
    );
    let series = cfg
        .q_list
        .iter()
        .map(|&q| {
            let pts = rows.iter().filter(|r| r.q == q).map(|r| (r.param, r.ratio)).collect();
            Series::new(format!("q = {q}"), pts)
        })
        .collect();
    let plot = Plot {
        title: "Extension ratio over thin bands".into(),
        x_label: "band width".into(),
        y_label: "weighted L^q norm / L^2 norm".into(),
        log_x: true,
        log_y: true,
        series,
    };
    report.add("plot.svg", plot.render().into_bytes());
    Ok(report)
}

// ---------------------------------------------------------------- thresholds

pub fn thresholds(cfg: &ThresholdParams) -> Result<Report, Failure> {
    let alphas = cfg.validate()?;
    let mut table = threshold_table(cfg.n, cfg.k, &alphas)?;
    if let Some(beta) = cfg.beta {
        for row in &mut table {
            let two = lambda_threshold_ab(cfg.n, cfg.k, row.alpha, beta)?;
            row.lambda = two.value;
            row.valid = two.valid;
        }
    }
    let mut report = Report::new(
        Status::Passed,
        json!({
            "N": cfg.n,
            "k": cfg.k,
            "rows": table.len(),
            "stein_tomas_q": table.first().map(|r| r.st_q),
            "valid_rows": table.iter().filter(|r| r.valid).count(),
        }),
    );
    report.add(
        "thresholds.csv",
        csv_bytes(
            &["alpha", "lambda", "mu", "valid", "st_q"],
            table.iter().map(|r| {
                vec![
                    fmt(r.alpha),
                    fmt(r.lambda),
                    r.mu.map(fmt).unwrap_or_default(),
                    r.valid.to_string(),
                    fmt(r.st_q),
                ]
            }),
        )?,
    );
    let lambda = table.iter().map(|r| (r.alpha, r.lambda)).collect();
    let mu = table.iter().filter_map(|r| Some((r.alpha, r.mu?))).collect();
    let st = table.iter().map(|r| (r.alpha, r.st_q)).collect();
    let plot = Plot {
        title: format!("Admissibility thresholds, N = {}, k = {}", cfg.n, cfg.k),
        x_label: "alpha".into(),
        y_label: "exponent".into(),
        series: vec![
            Series::new("lambda", lambda),
            Series::new("mu", mu),
            Series::new("Stein-Tomas", st),
        ],
        ..Default::default()
    };
    report.add("plot.svg", plot.render().into_bytes());
    Ok(report)
}

// ---------------------------------------------------------------- resolvent

pub fn verify_resolvent(cfg: &ResolventParams) -> Result<Report, Failure> {
    let n = cfg.n;
    let sigma = cfg.sigma;
    let scale = (2.0 * PI).powf(-(n as f64) / 2.0);
    let ghat = move |rho: f64| scale * (-(sigma * rho).powi(2) / 2.0).exp();
    let r_top = cfg.r_values.iter().fold(1.0f64, |m, &r| m.max(r));
    let u = radial_resolvent(n, ghat, 10.0 / sigma, &cfg.r_values, &RadialSpec::for_range(r_top))?;
    let damping = (-sigma * sigma / 2.0).exp();
    let mut rows = vec![];
    for (&r, &got) in cfg.r_values.iter().zip(&u) {
        let expected = damping * helmholtz_kernel(n, r)?;
        rows.push((r, got, expected, (got - expected).norm() / expected.norm()));
    }
    let worst = rows.iter().map(|r| r.3).fold(0.0, f64::max);

    let radii = log_space(0.01, cfg.split_r_max, 60);
    let split = split_phi(
        n,
        &radii,
        CutoffSpec::default(),
        &RadialSpec::for_range(cfg.split_r_max),
    )?;
    let ni = n as i32;
    let near_const = (0..radii.len())
        .map(|i| (1.0 + radii[i]).powf((n as f64 - 1.0) / 2.0) * split.phi1[i].norm())
        .fold(0.0, f64::max);
    let far_const = (0..radii.len())
        .map(|i| split.phi2[i].norm() / radii[i].powi(2 - ni).min(radii[i].powi(-ni)))
        .fold(0.0, f64::max);

    let mut report = Report::new(
        Status::from_checks(worst <= cfg.tol),
        json!({
            "N": n,
            "sigma": sigma,
            "max_rel_err": worst,
            "tol": cfg.tol,
            "oscillatory_constant": near_const,
            "remainder_constant": far_const,
        }),
    );
    report.add(
        "resolvent.csv",
        csv_bytes(
            &["r", "u_re", "u_im", "expected_re", "expected_im", "rel_err"],
            rows.iter()
                .map(|(r, a, b, e)| vec![fmt(*r), fmt(a.re), fmt(a.im), fmt(b.re), fmt(b.im), fmt(*e)]),
        )?,
    );
    report.add(
        "split.csv",
        csv_bytes(
            &["r", "phi_abs", "phi1_abs", "phi2_abs"],
            (0..radii.len()).map(|i| {
                vec![
                    fmt(radii[i]),
                    fmt(split.phi[i].norm()),
                    fmt(split.phi1[i].norm()),
                    fmt(split.phi2[i].norm()),
                ]
            }),
        )?,
    );
    let curve = |v: &[Complex64]| radii.iter().zip(v).map(|(&r, z)| (r, z.norm())).collect();
    let plot = Plot {
        title: format!("Split of the fundamental solution, N = {n}"),
        x_label: "r".into(),
        y_label: "modulus".into(),
        log_x: true,
        log_y: true,
        series: vec![
            Series::new("full", curve(&split.phi)),
            Series::new("near sphere", curve(&split.phi1)),
            Series::new("remainder", curve(&split.phi2)),
        ],
    };
    report.add("plot.svg", plot.render().into_bytes());
    Ok(report)
}

// ---------------------------------------------------------------- solver

fn field_bytes(field: &BiRadialField) -> Result<Vec<u8>, Failure> {
    let mut out = vec![];
    write_field(field, &mut out)?;
    Ok(out)
}

pub fn solve_nls(cfg: &SolveParams) -> Result<Report, Failure> {
    use shl_core::Error as E;
    let (dim, w) = cfg.validate()?;
    let g = &cfg.grid;
    let grid = BiRadialGrid::new(GridSpec::desk(dim, g.t_max, g.xi_max, g.space_width, g.fine_width))?;
    let state = match solve_bound_state(&grid, &w, cfg.p, cfg.q, &cfg.solver) {
        Ok(s) => s,
        Err(E::NonConvergence {
            iterations,
            residual,
            history,
        }) => {
            let mut report = Report::new(
                Status::NoSolution,
                json!({ "outcome": "non_convergence", "iterations": iterations, "residual": residual }),
            );
            report.add("results.csv", history_csv(&history)?);
            return Ok(report);
        }
        Err(e @ (E::NoScale(_) | E::TrivialOnly(_))) => {
            return Ok(Report::new(
                Status::NoSolution,
                json!({ "outcome": "no_solution", "reason": e.to_string() }),
            ));
        }
        Err(e) => return Err(e.into()),
    };
    let recon = reconstruct_u(&state, &cfg.solver.multiplier)?;
    let peak = concentration(&state, cfg.radius)?;
    let ok = state.el_residual() <= cfg.solver.residual_tol && recon.residual <= 1e-3;
    let (rows, cols) = grid.shape(shl_core::resolvent::Side::Space);
    let (freq_rows, freq_cols) = grid.shape(shl_core::resolvent::Side::Frequency);
    let solution = json!({
        "N": dim.n(),
        "k": dim.k(),
        "p": cfg.p,
        "q": cfg.q,
        "energy": state.energy(),
        "el_residual": state.el_residual(),
        "reconstruction_residual": recon.residual,
        "iterations": state.iterations(),
        "dual_norm": state.dual_norm(),
        "quadratic_form": state.quadratic_form(),
        "concentration": { "t": peak.center.t, "s": peak.center.s, "radius": cfg.radius, "mass": peak.mass },
        "space_shape": [rows, cols],
        "frequency_shape": [freq_rows, freq_cols],
    });
    let mut report = Report::new(Status::from_checks(ok), solution.clone());
    report.add("results.csv", history_csv(state.history())?);
    report.add("v.bin", field_bytes(&state.v())?);
    report.add("u.bin", field_bytes(&recon.u)?);
    let mut sidecar = serde_json::to_vec_pretty(&solution).map_err(|e| Failure::Io(e.into()))?;
    sidecar.push(b'\n');
    report.add("solution.json", sidecar);

    let (v_t, v_s) = state.v().slices();
    let (u_t, u_s) = recon.u.slices();
    let slice_rows = v_t
        .iter()
        .zip(&u_t)
        .map(|(a, b)| ("t", a, b))
        .chain(v_s.iter().zip(&u_s).map(|(a, b)| ("s", a, b)))
        .map(|(axis, (r, v), (_, u))| vec![axis.to_string(), fmt(*r), fmt(v.re), fmt(u.re)]);
    report.add("slices.csv", csv_bytes(&["axis", "r", "v", "u"], slice_rows)?);
    let line = |s: &[(f64, Complex64)]| s.iter().map(|(r, z)| (*r, z.re)).collect();
    let plot = Plot {
        title: format!("Bound state slices, N = {}, k = {}, p = {}", dim.n(), dim.k(), cfg.p),
        x_label: "radius".into(),
        y_label: "value".into(),
        series: vec![
            Series::new("v along t", line(&v_t)),
            Series::new("v along s", line(&v_s)),
            Series::new("u along t", line(&u_t)),
            Series::new("u along s", line(&u_s)),
        ],
        ..Default::default()
    };
    report.add("plot.svg", plot.render().into_bytes());
    Ok(report)
}

fn history_csv(history: &[f64]) -> Result<Vec<u8>, Failure> {
    csv_bytes(
        &["iteration", "residual"],
        history
            .iter()
            .enumerate()
            .map(|(i, r)| vec![(i + 1).to_string(), fmt(*r)]),
    )
}
