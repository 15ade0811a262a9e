use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shl_core::geometry::*;
use shl_core::quadrature::{gauss_legendre, uniform_breaks, Rule};
use shl_core::specfun::unit_ball_volume;
use shl_core::Error;

fn dim(n: usize, k: usize) -> SymmetryDim {
    SymmetryDim::new(n, k).unwrap()
}

fn pt(t: f64, s: f64) -> ReducedPoint {
    ReducedPoint::new(t, s)
}

#[test]
fn power_layer_membership() {
    let w = WeightSpec::power_layer(1.0, 1.0, 1.0, 1.0).unwrap();
    let d = dim(3, 1);
    assert_eq!(weight_eval(&w, d, pt(0.5, 2.0)), 1.0);
    assert_eq!(weight_eval(&w, d, pt(2.0, 2.0)), 0.0);
    assert_eq!(weight_eval(&w, d, pt(1e9, 0.0)), 1.0);
    let w = WeightSpec::power_layer(2.0, 1.0, 1.0, 1.0).unwrap();
    assert_eq!(weight_eval(&w, d, pt(3.0, 0.5)), 1.0);
    assert!(WeightSpec::power_layer(1.0, 2.0, 1.0, 1.0).is_err());
    assert!(WeightSpec::power_layer(1.0, 1.0, 0.0, 1.0).is_err());
}

#[test]
fn power_layer_is_monotone() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..200 {
        let beta = rng.gen_range(0.1..3.0);
        let w = WeightSpec::power_layer(beta + rng.gen_range(0.0..2.0), beta, rng.gen_range(0.1..3.0), 1.0).unwrap();
        let (t, s) = (rng.gen_range(0.0..5.0), rng.gen_range(0.0..5.0));
        let dt = rng.gen_range(0.0..2.0);
        assert!(w.eval(pt(t + dt, s)) <= w.eval(pt(t, s)));
        let s1 = s.max(1.0);
        assert!(w.eval(pt(t, s1 + dt)) <= w.eval(pt(t, s1)));
    }
}

#[test]
fn sampled_weights_interpolate_bilinearly() {
    let table = SampledWeight::new(vec![0.0, 1.0, 2.0], vec![0.0, 2.0], vec![1.0, 3.0, -1.0, 1.0, 0.0, 0.0]).unwrap();
    let w = WeightSpec::Sampled(table);
    let d = dim(3, 1);
    assert_eq!(weight_eval(&w, d, pt(0.0, 2.0)), 3.0);
    assert_eq!(weight_eval(&w, d, pt(0.5, 1.0)), 1.0);
    // clamped at zero
    assert_eq!(weight_eval(&w, d, pt(1.0, 0.0)), 0.0);
    assert_eq!(weight_eval(&w, d, pt(3.0, 1.0)), 0.0);
    assert!(SampledWeight::new(vec![0.0, 0.0], vec![0.0, 1.0], vec![0.0; 4]).is_err());
}

#[test]
fn weight_specs_round_trip_through_json() {
    let w = WeightSpec::power_layer(2.0, 1.0, 0.5, 3.0).unwrap();
    let text = serde_json::to_string(&w).unwrap();
    assert!(text.contains("\"kind\":\"power_layer\""));
    assert_eq!(serde_json::from_str::<WeightSpec>(&text).unwrap(), w);
    assert!(
        serde_json::from_str::<WeightSpec>(r#"{"kind":"power_layer","alpha":1,"beta":1,"a":1,"cap":1,"x":0}"#).is_err()
    );
}

#[test]
fn volume_element_values() {
    assert!((reduced_volume_element(dim(3, 1), pt(1.0, 1.0)) - 4.0 * PI).abs() < 1e-13);
    assert_eq!(reduced_volume_element(dim(5, 2), pt(0.0, 1.3)), 0.0);
}

fn half_line() -> Rule {
    Rule::composite(&uniform_breaks(0.0, 14.0, 28), 12)
}

#[test]
fn gaussian_integrates_to_its_total_mass() {
    let rule = half_line();
    for n in 3..=10 {
        for k in 1..n {
            let d = dim(n, k);
            let mut total = 0.0;
            for (&t, &wt) in rule.nodes.iter().zip(&rule.weights) {
                for (&s, &ws) in rule.nodes.iter().zip(&rule.weights) {
                    total += wt * ws * (-(t * t + s * s) / 2.0).exp() * reduced_volume_element(d, pt(t, s));
                }
            }
            let expected = (2.0 * PI).powf(n as f64 / 2.0);
            assert!((total / expected - 1.0).abs() < 1e-8, "N={n} k={k}");
        }
    }
}

#[test]
fn balls_have_the_right_volume() {
    // polar coordinates in the (t, s) quarter plane
    let angle = Rule::composite(&uniform_breaks(0.0, PI / 2.0, 4), 20);
    let radius = gauss_legendre(20);
    let r = 1.7;
    for n in 3..=8 {
        for k in 1..n {
            let d = dim(n, k);
            let mut total = 0.0;
            for (&th, &wth) in angle.nodes.iter().zip(&angle.weights) {
                for (&x, &wx) in radius.nodes.iter().zip(&radius.weights) {
                    let rho = 0.5 * r * (1.0 + x);
                    let w = 0.5 * r * wx * wth * rho;
                    total += w * reduced_volume_element(d, pt(rho * th.cos(), rho * th.sin()));
                }
            }
            let expected = unit_ball_volume(n) * r.powi(n as i32);
            assert!(
                (total / expected - 1.0).abs() < 1e-6,
                "N={n} k={k}: {total} vs {expected}"
            );
        }
    }
}

#[test]
fn ball_mass_of_zero_weight_vanishes() {
    let w = WeightSpec::power_layer(1.0, 1.0, 1.0, 0.0).unwrap();
    assert_eq!(region_ball_mass(&w, dim(3, 1), pt(0.0, 1.0), 1.0).unwrap(), 0.0);
    let w = WeightSpec::power_layer(1.0, 1.0, 1.0, 1.0).unwrap();
    assert!(region_ball_mass(&w, dim(3, 1), pt(0.0, 1.0), 0.0).is_err());
}

#[test]
fn ball_mass_decays_at_the_predicted_rate() {
    let w = WeightSpec::power_layer(1.0, 1.0, 1.0, 1.0).unwrap();
    let d = dim(3, 1);
    let near = region_ball_mass(&w, d, pt(0.0, 10.0), 1.0).unwrap();
    let far = region_ball_mass(&w, d, pt(0.0, 100.0), 1.0).unwrap();
    assert!(far < near);
    assert!(far / near <= (99.0f64 / 9.0).powf(-2.0) * 1.5, "ratio {}", far / near);
}

#[test]
fn ball_mass_is_bracketed_by_a_direct_oracle() {
    // Monte-Carlo ball mass in ℝ³ for the α = β = 1 layer
    let w = WeightSpec::power_layer(1.0, 1.0, 1.0, 1.0).unwrap();
    let d = dim(3, 1);
    let center = pt(0.3, 2.0);
    let radius = 1.0;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let samples = 400_000;
    let mut hits = 0usize;
    let c = center.representative(d);
    for _ in 0..samples {
        let y: Vec<f64> = c.iter().map(|&ci| ci + rng.gen_range(-radius..radius)).collect();
        let d2: f64 = y.iter().zip(&c).map(|(a, b)| (a - b).powi(2)).sum();
        if d2 < radius * radius && w.eval(ReducedPoint::of(d, &y)) > 0.0 {
            hits += 1;
        }
    }
    let oracle = 8.0 * hits as f64 / samples as f64;
    let mass = region_ball_mass(&w, d, center, radius).unwrap();
    assert!((mass / oracle - 1.0).abs() < 0.03, "mass {mass} oracle {oracle}");
}

fn specs() -> Vec<WeightSpec> {
    [(1.0, 1.0, 1.0), (2.0, 1.0, 1.0), (0.5, 0.5, 2.0), (3.0, 0.3, 0.5)]
        .iter()
        .map(|&(a, b, h)| WeightSpec::power_layer(a, b, h, 1.0).unwrap())
        .collect()
}

#[test]
fn ball_mass_decays_along_every_direction() {
    let radii = [10.0, 30.0, 100.0, 300.0];
    for n in 3..=6 {
        for k in 1..n {
            let d = dim(n, k);
            for w in specs() {
                for theta in [0.0, PI / 4.0, PI / 2.0] {
                    let masses: Vec<f64> = radii
                        .iter()
                        .map(|&r| region_ball_mass(&w, d, pt(r * theta.cos(), r * theta.sin()), 1.0).unwrap())
                        .collect();
                    // strictly decreasing while positive; balls clear of the layer carry nothing
                    let decays = masses.windows(2).all(|m| m[1] < m[0] || (m[0] == 0.0 && m[1] == 0.0));
                    assert!(decays, "N={n} k={k} {w:?} θ={theta}: {masses:?}");
                }
            }
        }
    }
}

#[test]
fn packing_examples() {
    assert!(orbit_packing_lower_bound(dim(4, 2), pt(100.0, 0.0), 1.0).unwrap() >= 157);
    assert_eq!(orbit_packing_lower_bound(dim(4, 2), pt(0.3, 0.2), 2.0).unwrap(), 1);
    assert!(orbit_packing_lower_bound(dim(4, 2), pt(1.0, 1.0), 0.0).is_err());
    // N = 3, k = 1: the growing s factor is S⁰
    for s in [10.0, 100.0, 1e4] {
        let bound = orbit_packing_lower_bound(dim(3, 1), pt(2.0, s), 1.0).unwrap();
        assert!(bound <= 2 * ((PI * 2.0 / 2.0).floor() as u64).max(1));
    }
}

#[test]
fn packing_diverges_exactly_along_positive_dimensional_factors() {
    let scales = [10.0, 100.0, 1e3, 1e4, 1e5];
    for n in 4..=8 {
        for k in 1..n {
            let d = dim(n, k);
            for (growing_dim, along_t) in [(n - k - 1, true), (k - 1, false)] {
                let bounds: Vec<u64> = scales
                    .iter()
                    .map(|&r| {
                        let p = if along_t { pt(r, 1.0) } else { pt(1.0, r) };
                        orbit_packing_lower_bound(d, p, 1.0).unwrap()
                    })
                    .collect();
                if growing_dim >= 1 {
                    assert!(bounds.windows(2).all(|b| b[1] > b[0]), "N={n} k={k}: {bounds:?}");
                    assert!(*bounds.last().unwrap() >= 100_000);
                } else {
                    assert!(bounds.windows(2).all(|b| b[1] == b[0]), "N={n} k={k}: {bounds:?}");
                }
            }
        }
    }
}

#[test]
fn symmetrization_fixes_invariant_functions() {
    let d = dim(4, 2);
    let nodes: Vec<ReducedPoint> = (0..6).map(|i| pt(0.3 * i as f64, 1.5 - 0.2 * i as f64)).collect();
    let f = |x: &[f64]| {
        let a = x[0] * x[0] + x[1] * x[1];
        let b = x[2] * x[2] + x[3] * x[3];
        (-a).exp() * (1.0 + b).ln()
    };
    let avg = haar_symmetrize(f, d, &nodes).unwrap();
    for (p, v) in nodes.iter().zip(&avg) {
        let direct = f(&p.representative(d));
        assert!((v - direct).abs() < 1e-10);
    }
    let odd = haar_symmetrize(|x: &[f64]| x[0], d, &nodes).unwrap();
    assert!(odd.iter().all(|v| v.abs() < 1e-12));
    assert!(matches!(
        haar_symmetrize(f, dim(5, 2), &nodes),
        Err(Error::UnsupportedScale(_))
    ));
}

#[test]
fn symmetrization_is_a_projection() {
    let d = dim(3, 2);
    let nodes: Vec<ReducedPoint> = (0..8).map(|i| pt(0.2 + 0.25 * i as f64, 0.1 * i as f64)).collect();
    let f = |x: &[f64]| (x[0] + 0.5 * x[1] * x[2]).sin() + x[2];
    let once = haar_symmetrize(f, d, &nodes).unwrap();
    // the averaged function, as a function on ℝ³, depends only on the reduced point
    let again = haar_symmetrize(
        |x: &[f64]| {
            let r = ReducedPoint::of(d, x);
            haar_symmetrize(f, d, &[r]).unwrap()[0]
        },
        d,
        &nodes,
    )
    .unwrap();
    for (a, b) in once.iter().zip(&again) {
        assert!((a - b).abs() < 1e-10);
    }
}

#[test]
fn symmetrization_matches_monte_carlo() {
    let d = dim(3, 1);
    // small orbit variance keeps the sampling error near 1e-5
    let f = |x: &[f64]| 1.0 + 0.02 * (x[0] + 2.0 * x[1]).sin() + 0.01 * x[2] * x[0].cos() + 0.005 * x[0] * x[0];
    let nodes = [pt(0.5, 0.7), pt(1.3, 0.2), pt(2.0, 1.5)];
    let avg = haar_symmetrize(f, d, &nodes).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for (p, v) in nodes.iter().zip(&avg) {
        let samples = 1_000_000;
        let mut sum = 0.0;
        for _ in 0..samples {
            let phi: f64 = rng.gen_range(0.0..2.0 * PI);
            let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
            sum += f(&[p.t * phi.cos(), p.t * phi.sin(), sign * p.s]);
        }
        let mc = sum / samples as f64;
        assert!((mc - v).abs() < 1e-4, "{mc} vs {v}");
    }
}
