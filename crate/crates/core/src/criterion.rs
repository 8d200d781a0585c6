//! The dual criterion `m(θ, u) = ∫ φ'(1/c_θ) - [φ'(1/c) / c - φ(1/c)]_{c = c_θ(u)}`
//! and its integrals against the empirical and model copulas.
//!
//! Writing `x = 1/c`, the two pieces are `K1(c) = φ'(x)` (integrated over the
//! square) and `K2(c) = x φ'(x) - φ(x)`. Their `c`-derivatives are
//!
//! ```text
//! K1'  = -x² φ''(x)          K1''  = x³ (2 φ''(x) + x φ'''(x))
//! K2'  = -x³ φ''(x)          K2''  = x⁴ (3 φ''(x) + x φ'''(x))
//! ```
//!
//! and every θ- or u-derivative of `m` follows by the chain rule through
//! [`DensityDerivs`]. The chain rule is evaluated with the relative partials
//! `ċ/c`, `c̈/c`, ... and the scaled generator derivatives `x φ''(x)`,
//! `x² φ'''(x)`, which stay finite where `c` is tiny.
//!
//! Only `K2` at the evaluation point is floored at `clamp_eps`; the constant
//! term integrates the exact density, with the limit `φ'(∞)` where `c = 0`.

use std::collections::HashMap;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::copula::{Copula, DensityDerivs, Interval};
use crate::divergence::Divergence;
use crate::error::{Error, Result};
use crate::numeric::{graded_line_rule_with, QuadratureRule};
use crate::pseudo::PseudoSample;

pub const DEFAULT_CLAMP_EPS: f64 = 1e-12;
const CACHE_CAPACITY: usize = 4096;
/// Grading of the `u2` rule on `[v0(u1), 1]`; the constant-term integrands
/// have power-law singularities at the support edge.
const SUPPORT_EDGE_GRADING: i32 = 4;

/// `∫ K1(c_θ)` and its first two θ-derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantTerm {
    pub value: f64,
    pub grad: f64,
    pub hess: f64,
}

/// θ- and u-partials of `m`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MDerivs {
    pub d_theta: f64,
    pub d2_theta: f64,
    pub d_u1: f64,
    pub d_u2: f64,
    pub d2_theta_u1: f64,
    pub d2_theta_u2: f64,
}

/// Binds a generator, a family and a quadrature rule; memoizes the
/// constant term per θ.
#[derive(Debug)]
pub struct CriterionContext {
    phi: Divergence,
    model: Copula,
    rule: QuadratureRule,
    clamp_eps: f64,
    cache: Mutex<HashMap<u64, ConstantTerm>>,
}

impl Clone for CriterionContext {
    fn clone(&self) -> Self {
        Self {
            phi: self.phi,
            model: self.model,
            rule: self.rule.clone(),
            clamp_eps: self.clamp_eps,
            cache: Mutex::new(HashMap::new()),
        }
    }
}

impl CriterionContext {
    pub fn new(model: Copula, phi: Divergence, rule: QuadratureRule, clamp_eps: f64) -> Result<Self> {
        if !(clamp_eps > 0.0 && clamp_eps <= 1e-6) {
            return Err(Error::InvalidArgument(format!(
                "clamp_eps must lie in (0, 1e-6], got {clamp_eps}"
            )));
        }
        Ok(Self {
            phi,
            model,
            rule,
            clamp_eps,
            cache: Mutex::new(HashMap::new()),
        })
    }

    /// Default rule (order 64) and clamp (1e-12).
    pub fn with_defaults(model: Copula, phi: Divergence) -> Self {
        Self::new(model, phi, QuadratureRule::default(), DEFAULT_CLAMP_EPS)
            .expect("default clamp is valid")
    }

    pub fn phi(&self) -> Divergence {
        self.phi
    }

    pub fn model(&self) -> Copula {
        self.model
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    pub fn clamp_eps(&self) -> f64 {
        self.clamp_eps
    }

    /// The per-(family, φ) box that the estimator searches.
    pub fn search_box(&self) -> Interval {
        self.model.admissible_box(self.phi)
    }

    /// A warning when θ lies outside the admissible box for this pair.
    pub fn admissibility_warning(&self, theta: f64) -> Option<String> {
        let b = self.search_box();
        (!b.contains(theta)).then(|| {
            format!(
                "theta = {theta} lies outside the admissible set {b} for ({}, {}); the criterion is evaluated on the clamped integrand",
                self.model, self.phi
            )
        })
    }

    fn check_theta(&self, theta: f64) -> Result<()> {
        if theta.is_finite() && self.model.extended_space().contains(theta) {
            Ok(())
        } else {
            Err(Error::ParameterDomain {
                family: self.model.name(),
                theta,
                space: "extended",
            })
        }
    }

    fn compute_constant(&self, theta: f64) -> ConstantTerm {
        if let Some((a, b)) = self.phi.affine_dual_constant() {
            // ∫ (a + b c_θ) = a + b for every θ
            return ConstantTerm {
                value: a + b,
                grad: 0.0,
                hess: 0.0,
            };
        }
        let mut k = ConstantTerm {
            value: 0.0,
            grad: 0.0,
            hess: 0.0,
        };
        let mut add = |w: f64, u1: f64, u2: f64| {
            let d = self.model.density_derivs_unchecked(theta, u1, u2);
            if !(d.c > 0.0) {
                k.value += w * self.phi.deriv1(f64::INFINITY);
                return;
            }
            let x = 1.0 / d.c;
            let (a, b) = self.phi.scaled_derivs(x);
            let r1 = d.d_theta / d.c;
            let r2 = d.d2_theta / d.c;
            k.value += w * self.phi.deriv1(x);
            k.grad -= w * a * r1;
            k.hess += w * (a * (2.0 * r1 * r1 - r2) + b * r1 * r1);
        };
        if self.model.support_floor(theta, 0.5) > 0.0 {
            // the support edge v0(u1) moves with θ and cuts the tensor grid;
            // integrate u2 over [v0, 1] instead, strongly graded in both axes
            // (the span 1 - v0 is a fractional power of u1 at 0)
            let (s, ws) = graded_line_rule_with(self.rule.order(), SUPPORT_EDGE_GRADING);
            let mut outside_mass = 0.0;
            for (&u1, &wu) in s.iter().zip(&ws) {
                let v0 = self.model.support_floor(theta, u1);
                let span = 1.0 - v0;
                let mut outside = v0;
                for (&sj, &wj) in s.iter().zip(&ws) {
                    let u2 = v0 + span * sj;
                    if u2 <= v0 {
                        outside += span * wj;
                        continue;
                    }
                    add(wu * span * wj, u1, u2);
                }
                outside_mass += wu * outside;
            }
            if outside_mass > 0.0 {
                k.value += outside_mass * self.phi.deriv1(f64::INFINITY);
            }
            // near the edge the θθ integrand is a positive multiple of
            // c^(q-1) / dist², integrable only when p (q - 1) > 1
            if let Some(p) = self.model.support_edge_order(theta) {
                if p * (self.phi.deriv2_decay() - 1.0) <= 1.0 {
                    k.hess = f64::INFINITY;
                }
            }
        } else {
            for p in self.rule.points() {
                add(p.w, p.u1, p.u2);
            }
        }
        k
    }

    /// `∫ K1(c_θ)` with θ-gradient and Hessian, memoized.
    pub fn constant(&self, theta: f64) -> ConstantTerm {
        let key = theta.to_bits();
        if let Some(&hit) = self.cache.lock().expect("cache lock").get(&key) {
            return hit;
        }
        let term = self.compute_constant(theta);
        let mut cache = self.cache.lock().expect("cache lock");
        if cache.len() >= CACHE_CAPACITY {
            cache.clear();
        }
        cache.insert(key, term);
        term
    }

    /// `m(θ, u)` without domain checks. The density is floored at
    /// `clamp_eps`; the flag reports whether the floor was hit.
    #[inline]
    pub fn m_value_unchecked(&self, theta: f64, u1: f64, u2: f64) -> (f64, bool) {
        let c = self.model.density_unchecked(theta, u1, u2);
        let clamped = !(c >= self.clamp_eps);
        let x = 1.0 / if clamped { self.clamp_eps } else { c };
        (self.constant(theta).value - self.phi.conjugate_at_deriv(x), clamped)
    }

    pub fn m_value(&self, theta: f64, u1: f64, u2: f64) -> Result<f64> {
        self.check_theta(theta)?;
        check_point(u1, u2)?;
        Ok(self.m_value_unchecked(theta, u1, u2).0)
    }

    /// Partials of `m` from the density partials `d` at the same point.
    #[inline]
    fn m_derivs_from(&self, k: &ConstantTerm, d: &DensityDerivs) -> MDerivs {
        if d.c < self.clamp_eps {
            // the floored K2 is locally constant
            return MDerivs {
                d_theta: k.grad,
                d2_theta: k.hess,
                ..Default::default()
            };
        }
        let x = 1.0 / d.c;
        let (a, b) = self.phi.scaled_derivs(x);
        let r1 = d.d_theta / d.c;
        let r2 = d.d2_theta / d.c;
        let s1 = d.d_u1 / d.c;
        let s2 = d.d_u2 / d.c;
        let t1 = d.d2_theta_u1 / d.c;
        let t2 = d.d2_theta_u2 / d.c;
        MDerivs {
            d_theta: k.grad + x * a * r1,
            d2_theta: k.hess - x * (a * (3.0 * r1 * r1 - r2) + b * r1 * r1),
            d_u1: x * a * s1,
            d_u2: x * a * s2,
            d2_theta_u1: -x * (a * (3.0 * r1 * s1 - t1) + b * r1 * s1),
            d2_theta_u2: -x * (a * (3.0 * r1 * s2 - t2) + b * r1 * s2),
        }
    }

    /// As [`Self::m_derivs_unchecked`] with the constant term supplied, for
    /// loops that hold θ fixed.
    #[inline]
    pub fn m_derivs_with(&self, k: &ConstantTerm, theta: f64, u1: f64, u2: f64) -> MDerivs {
        let d = self.model.density_derivs_unchecked(theta, u1, u2);
        self.m_derivs_from(k, &d)
    }

    #[inline]
    pub fn m_derivs_unchecked(&self, theta: f64, u1: f64, u2: f64) -> MDerivs {
        let k = self.constant(theta);
        let d = self.model.density_derivs_unchecked(theta, u1, u2);
        self.m_derivs_from(&k, &d)
    }

    pub fn m_derivs(&self, theta: f64, u1: f64, u2: f64) -> Result<MDerivs> {
        self.check_theta(theta)?;
        check_point(u1, u2)?;
        Ok(self.m_derivs_unchecked(theta, u1, u2))
    }

    /// `∫ m(θ, ·) dC_n`; `-inf` when the density floor is hit at a
    /// pseudo-observation or the constant term is not finite.
    pub fn empirical_criterion(&self, sample: &PseudoSample, theta: f64) -> Result<f64> {
        self.check_theta(theta)?;
        let k = self.constant(theta).value;
        if !k.is_finite() {
            return Ok(f64::NEG_INFINITY);
        }
        let mut acc = 0.0;
        for &(a, b) in sample.points() {
            let c = self.model.density_unchecked(theta, a, b);
            if !(c >= self.clamp_eps) || !c.is_finite() {
                return Ok(f64::NEG_INFINITY);
            }
            acc += self.phi.conjugate_at_deriv(1.0 / c);
        }
        let value = k - acc / sample.n() as f64;
        Ok(if value.is_finite() {
            value
        } else {
            f64::NEG_INFINITY
        })
    }

    /// `(∫ ∂m/∂θ dC_n, ∫ ∂²m/∂θ² dC_n)`.
    pub fn empirical_criterion_derivs(&self, sample: &PseudoSample, theta: f64) -> Result<(f64, f64)> {
        self.check_theta(theta)?;
        let k = self.constant(theta);
        let (mut g, mut h) = (0.0, 0.0);
        for &(a, b) in sample.points() {
            let d = self.model.density_derivs_unchecked(theta, a, b);
            let md = self.m_derivs_from(&k, &d);
            g += md.d_theta;
            h += md.d2_theta;
        }
        let n = sample.n() as f64;
        let (g, h) = (g / n, h / n);
        if g.is_finite() && h.is_finite() {
            Ok((g, h))
        } else {
            Err(Error::NonFiniteEvaluation {
                u1: f64::NAN,
                u2: f64::NAN,
                value: if g.is_finite() { h } else { g },
            })
        }
    }

    /// `∫ m(θ, u) c_{θ_T}(u) du` by quadrature.
    pub fn population_criterion(&self, theta: f64, theta_true: f64) -> f64 {
        let k = self.constant(theta).value;
        let e = self.rule.sum(|a, b| {
            let ct = self.model.density_unchecked(theta_true, a, b);
            if ct == 0.0 {
                return 0.0;
            }
            let c = self.model.density_unchecked(theta, a, b).max(self.clamp_eps);
            ct * self.phi.conjugate_at_deriv(1.0 / c)
        });
        k - e
    }

    /// `∫ ∂m/∂θ (θ, u) c_{θ_T}(u) du` by quadrature.
    pub fn population_gradient(&self, theta: f64, theta_true: f64) -> f64 {
        let k = self.constant(theta);
        self.rule.sum(|a, b| {
            let ct = self.model.density_unchecked(theta_true, a, b);
            let d = self.model.density_derivs_unchecked(theta, a, b);
            ct * self.m_derivs_from(&k, &d).d_theta
        })
    }

    /// `D_φ(θ₀, θ_T) = ∫ φ(1/c_{θ_T}) c_{θ_T}` by quadrature.
    pub fn population_divergence(&self, theta_true: f64) -> f64 {
        self.rule.sum(|a, b| {
            let c = self.model.density_unchecked(theta_true, a, b);
            if c > 0.0 {
                c * self.phi.value(1.0 / c)
            } else {
                // c φ(1/c) → φ'(∞) as c → 0
                self.phi.deriv1(f64::INFINITY)
            }
        })
    }
}

fn check_point(u1: f64, u2: f64) -> Result<()> {
    if u1 > 0.0 && u1 < 1.0 && u2 > 0.0 && u2 < 1.0 {
        Ok(())
    } else {
        Err(Error::ArgumentDomain { u1, u2 })
    }
}
