//! Gauss rules and composite panel rules.

use nalgebra::{DMatrix, SymmetricEigen};
use statrs::function::gamma::ln_gamma;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

/// Nodes and weights of a quadrature rule.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    /// Composite Gauss–Legendre rule with `order` nodes on each panel
    /// `[breaks[i], breaks[i+1]]`. Degenerate panels are skipped.
    pub fn composite(breaks: &[f64], order: usize) -> Rule {
        let base = gauss_legendre(order);
        let mut nodes = Vec::with_capacity(order * breaks.len());
        let mut weights = Vec::with_capacity(order * breaks.len());
        for pair in breaks.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            if b <= a {
                continue;
            }
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            for (x, w) in base.nodes.iter().zip(&base.weights) {
                nodes.push(mid + half * x);
                weights.push(half * w);
            }
        }
        Rule { nodes, weights }
    }
}

/// Splits `[a, b]` into `n` equal panels and returns the `n + 1` breakpoints.
pub fn uniform_breaks(a: f64, b: f64, n: usize) -> Vec<f64> {
    let n = n.max(1);
    (0..=n)
        .map(|i| if i == n { b } else { a + (b - a) * i as f64 / n as f64 })
        .collect()
}

/// Refines sorted breakpoints so no panel is wider than `max_width`.
pub fn refine_breaks(breaks: &[f64], max_width: f64) -> Vec<f64> {
    let mut out = vec![breaks[0]];
    for pair in breaks.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if b <= a {
            continue;
        }
        let n = ((b - a) / max_width).ceil().max(1.0) as usize;
        out.extend(uniform_breaks(a, b, n).into_iter().skip(1));
    }
    out
}

/// Sorts, clips to `[lo, hi]` and deduplicates breakpoints, keeping both ends.
pub fn normalize_breaks(mut breaks: Vec<f64>, lo: f64, hi: f64) -> Vec<f64> {
    breaks.retain(|&x| x > lo && x < hi);
    breaks.push(lo);
    breaks.push(hi);
    breaks.sort_by(|a, b| a.total_cmp(b));
    let tol = 1e-14 * (hi - lo).abs().max(1.0);
    breaks.dedup_by(|a, b| (*a - *b).abs() <= tol);
    *breaks.last_mut().unwrap() = hi;
    breaks
}

fn legendre_cache() -> &'static Mutex<HashMap<usize, Arc<Rule>>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Rule>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Gauss–Legendre rule with `n` nodes on `[-1, 1]`, cached per `n`.
pub fn gauss_legendre(n: usize) -> Arc<Rule> {
    assert!(n > 0, "a Gauss rule needs at least one node");
    if let Some(rule) = legendre_cache().lock().unwrap().get(&n) {
        return rule.clone();
    }
    let rule = Arc::new(legendre_newton(n));
    legendre_cache().lock().unwrap().insert(n, rule.clone());
    rule
}

fn legendre_newton(n: usize) -> Rule {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Rule { nodes, weights }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss–Jacobi rule for the weight `(1-x)^a (1+x)^b` on `[-1, 1]`, built
/// from the eigen-decomposition of the Jacobi matrix (Golub–Welsch).
pub fn gauss_jacobi(n: usize, a: f64, b: f64) -> Rule {
    assert!(n > 0 && a > -1.0 && b > -1.0, "invalid Gauss–Jacobi request");
    let ab = a + b;
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        let kf = k as f64;
        let diag = if k == 0 {
            (b - a) / (ab + 2.0)
        } else {
            let s = 2.0 * kf + ab;
            (b * b - a * a) / (s * (s + 2.0))
        };
        jac[(k, k)] = diag;
        if k + 1 < n {
            let j = kf + 1.0;
            let s = 2.0 * j + ab;
            let off2 = if k == 0 {
                4.0 * (1.0 + a) * (1.0 + b) / ((2.0 + ab).powi(2) * (3.0 + ab))
            } else {
                4.0 * j * (j + a) * (j + b) * (j + ab) / (s * s * (s + 1.0) * (s - 1.0))
            };
            jac[(k, k + 1)] = off2.sqrt();
            jac[(k + 1, k)] = off2.sqrt();
        }
    }
    let mass = ((ab + 1.0) * 2f64.ln() + ln_gamma(a + 1.0) + ln_gamma(b + 1.0) - ln_gamma(ab + 2.0)).exp();
    let eig = SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], mass * v0 * v0)
        })
        .collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    Rule {
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn legendre_is_exact_for_polynomials() {
        for n in 1..=40 {
            let rule = gauss_legendre(n);
            for deg in 0..2 * n {
                let got = rule.integrate(|x| x.powi(deg as i32));
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((got - exact).abs() < 1e-13, "n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn jacobi_chebyshev_case() {
        // (1-x²)^{-1/2}: nodes cos((2i-1)π/2n), weights π/n
        let rule = gauss_jacobi(8, -0.5, -0.5);
        for (i, (&x, &w)) in rule.nodes.iter().zip(&rule.weights).rev().enumerate() {
            let expected = ((2 * i + 1) as f64 * PI / 16.0).cos();
            assert_relative_eq!(x, expected, epsilon = 1e-13);
            assert_relative_eq!(w, PI / 8.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn jacobi_moments() {
        // ∫(1-x)^{1/2} x² dx on [-1,1] = 2^{3/2}·(1/3·... ) via Beta functions;
        // compare with a fine Gauss–Legendre rule after the substitution x = 1 - u².
        let rule = gauss_jacobi(10, 0.5, 0.0);
        let got = rule.integrate(|x| x * x);
        let fine = Rule::composite(&uniform_breaks(0.0, 2f64.sqrt(), 40), 20);
        let reference = fine.integrate(|u| {
            let x = 1.0 - u * u;
            u * x * x * 2.0 * u
        });
        assert_relative_eq!(got, reference, epsilon = 1e-13);
    }

    #[test]
    fn composite_rule_integrates_smooth_function() {
        let rule = Rule::composite(&uniform_breaks(0.0, PI, 7), 10);
        assert_relative_eq!(rule.integrate(f64::sin), 2.0, epsilon = 1e-14);
    }

    #[test]
    fn break_helpers() {
        let b = normalize_breaks(vec![0.5, 0.2, 0.5, 3.0], 0.0, 1.0);
        assert_eq!(b, vec![0.0, 0.2, 0.5, 1.0]);
        let r = refine_breaks(&[0.0, 1.0, 1.1], 0.3);
        assert_eq!(r.len(), 6);
    }
}
