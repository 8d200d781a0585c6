use std::f64::consts::PI;

use crate::error::{Error, Result};

pub const DEFAULT_ORDER: usize = 64;

/// Grading exponent of the endpoint-clustering substitution
/// `s -> s^k / (s^k + (1 - s)^k)`.
const GRADING: i32 = 2;

/// Gauss–Legendre nodes and weights on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let half = n.div_ceil(2);
    for i in 0..half {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss–Legendre rule on `(0, 1)` pushed through a sigmoidal substitution
/// that clusters nodes at both endpoints. Nodes are symmetric about 1/2 and
/// the weights sum to one.
pub fn graded_line_rule(n: usize) -> (Vec<f64>, Vec<f64>) {
    graded_line_rule_with(n, GRADING)
}

/// [`graded_line_rule`] with grading exponent `k >= 1`; larger `k` resolves
/// logarithmic endpoint singularities better at the cost of interior density.
pub fn graded_line_rule_with(n: usize, k: i32) -> (Vec<f64>, Vec<f64>) {
    assert!(k >= 1, "grading exponent must be at least 1");
    let (s, w) = gauss_legendre(n);
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for (&si, &wi) in s.iter().zip(&w) {
        let t = 0.5 * (si + 1.0);
        let a = t.powi(k);
        let b = (1.0 - t).powi(k);
        let x = a / (a + b);
        let dx = k as f64 * t.powi(k - 1) * (1.0 - t).powi(k - 1) / ((a + b) * (a + b));
        nodes.push(x);
        weights.push(0.5 * wi * dx);
    }
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let x = 0.5 * (nodes[i] + 1.0 - nodes[j]);
        nodes[i] = x;
        nodes[j] = 1.0 - x;
        let w = 0.5 * (weights[i] + weights[j]);
        weights[i] = w;
        weights[j] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.5;
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    (nodes, weights)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadPoint {
    pub u1: f64,
    pub u2: f64,
    pub w: f64,
}

/// Cubature rule for the open unit square.
///
/// The square is split along the diagonal and each triangle is mapped from
/// the unit square by `(s, t) -> (s, s t)` (and its mirror image). The
/// Jacobian `s` cancels the homogeneous `1/r` corner singularity that
/// Archimedean densities carry at the origin, and the graded line rule in
/// each of `s` and `t` absorbs the algebraic edge singularities. The point
/// set is invariant under `(u1, u2) -> (u2, u1)`.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    order: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    points: Vec<QuadPoint>,
}

impl QuadratureRule {
    pub fn new(order: usize) -> Result<Self> {
        if order < 2 {
            return Err(Error::InvalidArgument(format!(
                "quadrature order must be at least 2, got {order}"
            )));
        }
        let (nodes, weights) = graded_line_rule(order);
        let mut points = Vec::with_capacity(2 * order * order);
        for (&s, &ws) in nodes.iter().zip(&weights) {
            for (&t, &wt) in nodes.iter().zip(&weights) {
                let w = ws * wt * s;
                points.push(QuadPoint { u1: s, u2: s * t, w });
                points.push(QuadPoint { u1: s * t, u2: s, w });
            }
        }
        let total: f64 = points.iter().map(|p| p.w).sum();
        points.iter_mut().for_each(|p| p.w /= total);
        Ok(Self {
            order,
            nodes,
            weights,
            points,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// One-dimensional graded nodes on `(0, 1)`.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn points(&self) -> &[QuadPoint] {
        &self.points
    }

    /// Unchecked sum `Σ w f(u1, u2)`.
    #[inline]
    pub fn sum<F: FnMut(f64, f64) -> f64>(&self, mut f: F) -> f64 {
        self.points.iter().map(|p| p.w * f(p.u1, p.u2)).sum()
    }

    /// One-dimensional integral over `(0, 1)` with the graded line rule.
    #[inline]
    pub fn line_sum<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

impl Default for QuadratureRule {
    fn default() -> Self {
        Self::new(DEFAULT_ORDER).expect("default order is valid")
    }
}

/// `∫∫_(0,1)^2 f`, failing on the first non-finite integrand value.
pub fn integrate2d<F: FnMut(f64, f64) -> f64>(mut f: F, rule: &QuadratureRule) -> Result<f64> {
    let mut acc = 0.0;
    for p in rule.points() {
        let v = f(p.u1, p.u2);
        if !v.is_finite() {
            return Err(Error::NonFiniteEvaluation {
                u1: p.u1,
                u2: p.u2,
                value: v,
            });
        }
        acc += p.w * v;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn legendre_rule_is_exact_for_polynomials() {
        let (x, w) = gauss_legendre(5);
        let total: f64 = w.iter().sum();
        assert_relative_eq!(total, 2.0, epsilon = 1e-14);
        // degree 9 is the highest exact degree for 5 nodes
        let i9: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(8)).sum();
        assert_relative_eq!(i9, 2.0 / 9.0, epsilon = 1e-14);
        assert_relative_eq!(x[2], 0.0);
        assert_relative_eq!(x[4], 0.906_179_845_938_664, epsilon = 1e-14);
    }

    #[test]
    fn line_rule_invariants() {
        for n in [2, 7, 32, 64, 128] {
            let (x, w) = graded_line_rule(n);
            let total: f64 = w.iter().sum();
            assert!((total - 1.0).abs() <= 1e-14);
            for i in 0..n {
                assert!(x[i] > 0.0 && x[i] < 1.0);
                assert!(w[i] > 0.0);
                assert!((x[i] + x[n - 1 - i] - 1.0).abs() <= 1e-15);
            }
        }
    }

    #[test]
    fn constant_and_product() {
        let rule = QuadratureRule::default();
        assert!((integrate2d(|_, _| 1.0, &rule).unwrap() - 1.0).abs() < 1e-14);
        assert!((integrate2d(|u, v| u * v, &rule).unwrap() - 0.25).abs() < 1e-12);
        assert!((integrate2d(|u, v| u * u + v, &rule).unwrap() - (1.0 / 3.0 + 0.5)).abs() < 1e-12);
    }

    #[test]
    fn reports_non_finite_node() {
        let rule = QuadratureRule::new(8).unwrap();
        let err = integrate2d(|u, _| if u > 0.5 { f64::NAN } else { 1.0 }, &rule).unwrap_err();
        assert!(matches!(err, Error::NonFiniteEvaluation { u1, .. } if u1 > 0.5));
    }

    #[test]
    fn corner_singularity() {
        // ∫∫ 1/sqrt(u^2 + v^2) over the unit square = 2 asinh(1)
        let rule = QuadratureRule::default();
        let got = rule.sum(|u, v| 1.0 / (u * u + v * v).sqrt());
        assert!((got - 2.0 * 1f64.asinh()).abs() < 1e-10, "{got}");
    }

    #[test]
    fn rejects_tiny_order() {
        assert!(QuadratureRule::new(1).is_err());
    }
}
