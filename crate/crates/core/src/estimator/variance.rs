//! Sandwich variance of `θ̂` and the variance `σ²` of `D̂` under an
//! alternative, including the rank-correction terms
//!
//! ```text
//! W(x) = ∫∫ 1{x ≤ u1} ∂²m/∂θ∂u1 (θ, u) c_θ(u) du
//! Y(x) = ∫∫ 1{x ≤ u1} ∂m/∂u1 (θ, u) c_θ(u) du
//! ```
//!
//! All built-in families are exchangeable, so the second-margin terms are
//! `W(u2)` and `Y(u2)` with the same functions.
//!
//! Both are strip integrals `∫_x^1 G(s) ds` with `G(s) = ∫_0^1 f(s, v(w|s)) dw`,
//! where `v(·|s)` is the conditional quantile, so that `c_θ(s, v) dv = dw`.
//! `G` is integrated on a breakpoint mesh (query points merged with the graded
//! nodes) and suffix sums give every query at once.

use serde::{Deserialize, Serialize};

use crate::criterion::CriterionContext;
use crate::error::{Error, Result};
use crate::exec::map_range;
use crate::numeric::{gauss_legendre, graded_line_rule, graded_line_rule_with};
use crate::pseudo::PseudoSample;

const PANEL_NODES: usize = 4;
const TOP_NODES: usize = 16;
/// Grading of the rule in conditional coordinates, where the integrands carry
/// logarithmic endpoint singularities but no interior concentration.
const CONDITIONAL_GRADING: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StripValues {
    /// `W(x)`.
    pub w: f64,
    /// `Y(x)`.
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceComponents {
    /// `S = -∫ ∂²m/∂θ² dC_n`.
    pub s: f64,
    /// `M = Var(∂m/∂θ + W(u1) + W(u2))`.
    pub m: f64,
    /// `Ξ = M / S²`, the asymptotic variance of `√n (θ̂ - θ)`.
    pub xi: f64,
    /// `σ² = Var(m + Y(u1) + Y(u2))`.
    pub sigma2: f64,
    pub w_terms: Vec<[f64; 2]>,
    pub y_terms: Vec<[f64; 2]>,
}

/// Model-based counterparts of [`VarianceComponents`] at `θ_T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopulationComponents {
    pub theta: f64,
    /// `D_φ(θ₀, θ_T)`.
    pub d: f64,
    pub s: f64,
    pub m: f64,
    pub xi: f64,
    pub sigma2: f64,
}

fn conditional_rule(ctx: &CriterionContext) -> (Vec<f64>, Vec<f64>) {
    graded_line_rule_with(ctx.rule().order(), CONDITIONAL_GRADING)
}

/// `G(s) = (∫ ∂²m/∂θ∂u1, ∫ ∂m/∂u1)` along the conditional line at `s`.
fn line_integrals(ctx: &CriterionContext, rule: &(Vec<f64>, Vec<f64>), theta: f64, s: f64) -> (f64, f64) {
    let model = ctx.model();
    let k = ctx.constant(theta);
    let (mut gw, mut gy) = (0.0, 0.0);
    for (&w, &wt) in rule.0.iter().zip(&rule.1) {
        let v = model.conditional_inverse(theta, s, w);
        let d = ctx.m_derivs_with(&k, theta, s, v);
        gw += wt * d.d2_theta_u1;
        gy += wt * d.d_u1;
    }
    (gw, gy)
}

/// `W(x)` and `Y(x)` for every `x` in `xs` (each in `(0, 1)`).
///
/// At `θ₀` both vanish identically: `∂m/∂u1 = 0` there, and
/// `∂²m/∂θ∂u1 = φ''(1) ∂ċ/∂u1` integrates to zero over every vertical line
/// because `∫ ċ(u1, v) dv = 0` for a copula with uniform margins.
pub fn strip_integrals(ctx: &CriterionContext, theta: f64, xs: &[f64]) -> Result<Vec<StripValues>> {
    if theta == ctx.model().theta0() {
        if let Some(&bad) = xs.iter().find(|&&x| !(x > 0.0 && x < 1.0)) {
            return Err(Error::ArgumentDomain { u1: bad, u2: f64::NAN });
        }
        return Ok(vec![StripValues::default(); xs.len()]);
    }
    strip_integrals_quadrature(ctx, theta, xs)
}

/// The quadrature path of [`strip_integrals`], used for every θ including
/// `θ₀`.
pub fn strip_integrals_quadrature(
    ctx: &CriterionContext,
    theta: f64,
    xs: &[f64],
) -> Result<Vec<StripValues>> {
    if let Some(&bad) = xs.iter().find(|&&x| !(x > 0.0 && x < 1.0)) {
        return Err(Error::ArgumentDomain { u1: bad, u2: f64::NAN });
    }
    if xs.is_empty() {
        return Ok(Vec::new());
    }
    let rule = conditional_rule(ctx);
    let mut breaks: Vec<f64> = xs.to_vec();
    breaks.sort_by(f64::total_cmp);
    let lowest = breaks[0];
    breaks.extend(ctx.rule().nodes().iter().filter(|&&t| t > lowest));
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();

    let (gl_x, gl_w) = gauss_legendre(PANEL_NODES);
    let (top_x, top_w) = graded_line_rule(TOP_NODES);
    let last = *breaks.last().expect("non-empty");

    // (abscissa, weight, panel) for every evaluation of G
    let mut nodes: Vec<(f64, f64, usize)> = Vec::with_capacity(breaks.len() * PANEL_NODES + TOP_NODES);
    for (k, pair) in breaks.windows(2).enumerate() {
        let (a, b) = (pair[0], pair[1]);
        let half = 0.5 * (b - a);
        for (&x, &w) in gl_x.iter().zip(&gl_w) {
            nodes.push((a + half * (x + 1.0), half * w, k));
        }
    }
    let top = breaks.len() - 1;
    for (&t, &w) in top_x.iter().zip(&top_w) {
        nodes.push((last + (1.0 - last) * t, (1.0 - last) * w, top));
    }

    let values = map_range(nodes.len(), |i| line_integrals(ctx, &rule, theta, nodes[i].0));
    let mut panels = vec![(0.0, 0.0); breaks.len()];
    for (&(_, w, k), (gw, gy)) in nodes.iter().zip(values) {
        panels[k].0 += w * gw;
        panels[k].1 += w * gy;
    }
    // suffix sums: the value at breaks[k] integrates panels k..
    let mut acc = (0.0, 0.0);
    for p in panels.iter_mut().rev() {
        acc.0 += p.0;
        acc.1 += p.1;
        *p = acc;
    }
    if !(acc.0.is_finite() && acc.1.is_finite()) {
        return Err(Error::NonFiniteEvaluation {
            u1: lowest,
            u2: f64::NAN,
            value: if acc.0.is_finite() { acc.1 } else { acc.0 },
        });
    }
    Ok(xs
        .iter()
        .map(|x| {
            let k = breaks
                .binary_search_by(|b| b.total_cmp(x))
                .expect("every query is a breakpoint");
            StripValues {
                w: panels[k].0,
                y: panels[k].1,
            }
        })
        .collect())
}

/// Empirical `S`, `M`, `Ξ` and `σ²` at `theta` (normally `θ̂`).
pub fn variance_components(
    ctx: &CriterionContext,
    sample: &PseudoSample,
    theta: f64,
) -> Result<VarianceComponents> {
    let n = sample.n();
    if n < 2 {
        return Err(Error::InsufficientData(n));
    }
    let pts = sample.points();
    let xs: Vec<f64> = pts.iter().flat_map(|&(a, b)| [a, b]).collect();
    let strips = strip_integrals(ctx, theta, &xs)?;

    let mut curvature = 0.0;
    let mut score = Vec::with_capacity(n);
    let mut level = Vec::with_capacity(n);
    let mut w_terms = Vec::with_capacity(n);
    let mut y_terms = Vec::with_capacity(n);
    for (i, &(a, b)) in pts.iter().enumerate() {
        let d = ctx.m_derivs(theta, a, b)?;
        let (m, _) = ctx.m_value_unchecked(theta, a, b);
        let (s1, s2) = (strips[2 * i], strips[2 * i + 1]);
        curvature -= d.d2_theta;
        score.push(d.d_theta + s1.w + s2.w);
        level.push(m + s1.y + s2.y);
        w_terms.push([s1.w, s2.w]);
        y_terms.push([s1.y, s2.y]);
    }
    let s = curvature / n as f64;
    let m = sample_variance(&score);
    let sigma2 = sample_variance(&level);
    finish_components(s, m, sigma2).map(|(s, m, xi, sigma2)| VarianceComponents {
        s,
        m,
        xi,
        sigma2,
        w_terms,
        y_terms,
    })
}

fn finish_components(s: f64, m: f64, sigma2: f64) -> Result<(f64, f64, f64, f64)> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::SingularCurvature(s));
    }
    let xi = m / (s * s);
    if !(xi >= 0.0) || !xi.is_finite() {
        return Err(Error::NotPositiveSemidefinite(xi));
    }
    if !sigma2.is_finite() {
        return Err(Error::NonFiniteEvaluation {
            u1: f64::NAN,
            u2: f64::NAN,
            value: sigma2,
        });
    }
    Ok((s, m, xi, sigma2))
}

fn sample_variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
}

/// Population `D`, `S`, `M`, `Ξ` and `σ²` when the data follow `C_{θ_T}`,
/// by quadrature in conditional coordinates.
pub fn population_components(ctx: &CriterionContext, theta_true: f64) -> Result<PopulationComponents> {
    let model = ctx.model();
    if !(theta_true.is_finite() && model.extended_space().contains(theta_true)) {
        return Err(Error::ParameterDomain {
            family: model.name(),
            theta: theta_true,
            space: "extended",
        });
    }
    let (nodes, weights) = conditional_rule(ctx);
    let q = nodes.len();
    let mut pts = Vec::with_capacity(q * q);
    for (&s, &ws) in nodes.iter().zip(&weights) {
        for (&w, &ww) in nodes.iter().zip(&weights) {
            pts.push((s, model.conditional_inverse(theta_true, s, w), ws * ww));
        }
    }
    let xs: Vec<f64> = pts.iter().flat_map(|&(a, b, _)| [a, b]).collect();
    let strips = strip_integrals(ctx, theta_true, &xs)?;

    let (mut curv, mut e_score, mut e_score2, mut e_level, mut e_level2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (i, &(a, b, w)) in pts.iter().enumerate() {
        let d = ctx.m_derivs_unchecked(theta_true, a, b);
        let (m, _) = ctx.m_value_unchecked(theta_true, a, b);
        let (s1, s2) = (strips[2 * i], strips[2 * i + 1]);
        let score = d.d_theta + s1.w + s2.w;
        let level = m + s1.y + s2.y;
        curv -= w * d.d2_theta;
        e_score += w * score;
        e_score2 += w * score * score;
        e_level += w * level;
        e_level2 += w * level * level;
    }
    let m = (e_score2 - e_score * e_score).max(0.0);
    let sigma2 = (e_level2 - e_level * e_level).max(0.0);
    let (s, m, xi, sigma2) = finish_components(curv, m, sigma2)?;
    Ok(PopulationComponents {
        theta: theta_true,
        d: ctx.population_divergence(theta_true),
        s,
        m,
        xi,
        sigma2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::copula::Copula;
    use crate::divergence::{builtins, Divergence};
    use crate::numeric::QuadratureRule;
    use crate::pseudo::{pseudo_observations, RankScaling, TiePolicy};

    /// Brute-force `W(x)`, `Y(x)`: panelled Gauss–Legendre on `[x, 1] × (0, 1)`
    /// with the density as weight, no change of variables.
    fn oracle(ctx: &CriterionContext, theta: f64, x: f64) -> (f64, f64) {
        let (gx, gw) = gauss_legendre(24);
        let (hx, hw) = gauss_legendre(12);
        let panels = 40;
        let (mut w, mut y) = (0.0, 0.0);
        // geometric panels in u1 toward 1, uniform-in-log panels in u2 at both ends
        let u1_edges: Vec<f64> = (0..=panels)
            .map(|k| 1.0 - (1.0 - x) * (1e-9f64).powf(k as f64 / panels as f64))
            .collect();
        let u2_edges: Vec<f64> = {
            let mut e: Vec<f64> = (0..=panels).map(|k| 0.5 * (1e-12f64).powf(1.0 - k as f64 / panels as f64)).collect();
            let upper: Vec<f64> = e.iter().rev().skip(1).map(|t| 1.0 - t).collect();
            e.extend(upper);
            e
        };
        for p in u1_edges.windows(2) {
            for (&a, &wa) in gx.iter().zip(&gw) {
                let u1 = p[0] + 0.5 * (p[1] - p[0]) * (a + 1.0);
                let h1 = 0.5 * (p[1] - p[0]) * wa;
                for q in u2_edges.windows(2) {
                    for (&b, &wb) in hx.iter().zip(&hw) {
                        let u2 = q[0] + 0.5 * (q[1] - q[0]) * (b + 1.0);
                        let h2 = 0.5 * (q[1] - q[0]) * wb;
                        let c = ctx.model().density_unchecked(theta, u1, u2);
                        let d = ctx.m_derivs_unchecked(theta, u1, u2);
                        w += h1 * h2 * c * d.d2_theta_u1;
                        y += h1 * h2 * c * d.d_u1;
                    }
                }
            }
        }
        (w, y)
    }

    #[test]
    fn strips_match_brute_force() {
        let cases = [
            (Copula::Frank, Divergence::Hellinger, 3.0),
            (Copula::Fgm, Divergence::Chi2, -0.6),
            (Copula::Clayton, Divergence::KlM, 1.0),
        ];
        for (model, phi, t) in cases {
            let ctx = CriterionContext::with_defaults(model, phi);
            let xs = [0.1, 0.35, 0.8];
            let got = strip_integrals(&ctx, t, &xs).unwrap();
            for (x, g) in xs.iter().zip(&got) {
                let (w, y) = oracle(&ctx, t, *x);
                assert!((g.w - w).abs() <= 1e-4 * (1.0 + w.abs()), "{model} {phi} W({x}): {} vs {w}", g.w);
                assert!((g.y - y).abs() <= 1e-4 * (1.0 + y.abs()), "{model} {phi} Y({x}): {} vs {y}", g.y);
            }
        }
    }

    #[test]
    fn strips_vanish_at_independence() {
        for model in [Copula::Clayton, Copula::Frank, Copula::Fgm] {
            for phi in builtins() {
                let ctx = CriterionContext::with_defaults(model, phi);
                let xs: Vec<f64> = (1..20).map(|k| k as f64 / 20.0).collect();
                for v in strip_integrals(&ctx, 0.0, &xs).unwrap() {
                    assert_eq!(v, StripValues::default());
                }
                for v in strip_integrals_quadrature(&ctx, 0.0, &xs).unwrap() {
                    assert!(v.w.abs() <= 1e-9, "{model} {phi}: {}", v.w);
                    assert_eq!(v.y, 0.0);
                }
            }
        }
    }

    #[test]
    fn curvature_equals_score_variance_at_independence() {
        for model in [Copula::Clayton, Copula::Frank, Copula::Fgm] {
            for phi in builtins() {
                let ctx = CriterionContext::with_defaults(model, phi);
                let k2 = phi.deriv2(1.0);
                let s = -ctx.rule().sum(|u, v| ctx.m_derivs_unchecked(0.0, u, v).d2_theta);
                let m = ctx.rule().sum(|u, v| ctx.m_derivs_unchecked(0.0, u, v).d_theta.powi(2));
                let fisher = ctx.rule().sum(|u, v| model.density_derivs_unchecked(0.0, u, v).d_theta.powi(2));
                // every built-in generator has φ''(1) = 1, so S = M = ∫ ċ²
                assert_eq!(k2, 1.0);
                assert!((s - m).abs() <= 1e-6 * s, "{model} {phi}: S {s} M {m}");
                assert!((s - fisher).abs() <= 1e-6 * s, "{model} {phi}: S {s} F {fisher}");
                // conditional-coordinate path, different rule
                let pc = population_components(&ctx, 0.0).unwrap_or_else(|e| panic!("{model} {phi}: {e}"));
                assert!((pc.s - s).abs() <= 1e-5 * s, "{model} {phi}: {} vs {s}", pc.s);
                assert!((pc.m - pc.s).abs() <= 1e-5 * pc.s, "{model} {phi}: M = {}", pc.m);
                assert!(pc.d.abs() <= 1e-14 && pc.sigma2 <= 1e-20);
            }
        }
    }

    #[test]
    fn fgm_fisher_information_at_zero() {
        // ċ = (1-2u)(1-2v) at θ = 0, ∫ ċ² = 1/9
        let ctx = CriterionContext::with_defaults(Copula::Fgm, Divergence::KlM);
        let pc = population_components(&ctx, 0.0).unwrap();
        assert!((pc.s - 1.0 / 9.0).abs() <= 1e-12);
        assert!((pc.xi - 9.0).abs() <= 1e-9);
    }

    #[test]
    fn empirical_components() {
        let data = Copula::Clayton.sample(2.0, 400, 11).unwrap();
        let s = pseudo_observations(&data, RankScaling::NPlusOne, TiePolicy::Midrank).unwrap();
        let ctx = CriterionContext::with_defaults(Copula::Clayton, Divergence::Hellinger);
        let vc = variance_components(&ctx, &s, 2.0).unwrap();
        assert!(vc.s > 0.0 && vc.m > 0.0 && vc.xi > 0.0 && vc.sigma2 > 0.0);
        assert_eq!(vc.w_terms.len(), 400);
        let pc = population_components(&ctx, 2.0).unwrap();
        assert!((vc.s - pc.s).abs() <= 0.25 * pc.s, "{} vs {}", vc.s, pc.s);
        assert!((vc.xi - pc.xi).abs() <= 0.35 * pc.xi, "{} vs {}", vc.xi, pc.xi);
        // exchangeability: W(u1), W(u2) are the same function
        let i = 7;
        let (a, b) = s.points()[i];
        let wa = strip_integrals(&ctx, 2.0, &[b, a]).unwrap();
        assert!((wa[1].w - vc.w_terms[i][0]).abs() <= 1e-12);
        assert!((wa[0].w - vc.w_terms[i][1]).abs() <= 1e-12);
    }

    #[test]
    fn rejects_degenerate_inputs() {
        let ctx = CriterionContext::with_defaults(Copula::Independence, Divergence::KlM);
        let s = pseudo_observations(&[(1.0, 2.0), (2.0, 1.0), (3.0, 3.0)], RankScaling::NPlusOne, TiePolicy::Midrank)
            .unwrap();
        assert!(matches!(variance_components(&ctx, &s, 0.0), Err(Error::SingularCurvature(_))));
        let ctx = CriterionContext::new(Copula::Frank, Divergence::KlM, QuadratureRule::new(16).unwrap(), 1e-12).unwrap();
        assert!(strip_integrals(&ctx, 1.0, &[0.0]).is_err());
    }
}
