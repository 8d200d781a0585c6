//! φ-divergence generators.
//!
//! Every generator is convex, twice differentiable on the interior of its
//! domain, and normalized so that `φ(1) = φ'(1) = 0` and `φ''(1) = 1`.
//! The L1 generator `|x - 1|` is deliberately absent: it has no derivative
//! at 1, so neither the dual criterion nor the `T_n` normalization exist.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Divergence {
    /// `x log x - x + 1`
    #[serde(rename = "kl")]
    Kl,
    /// `-log x + x - 1`; the dual estimator reduces to maximum pseudo-likelihood.
    #[serde(rename = "kl-m")]
    KlM,
    /// `(x - 1)^2 / 2`
    #[serde(rename = "chi2")]
    Chi2,
    /// `(x - 1)^2 / (2x)`
    #[serde(rename = "chi2-m")]
    Chi2M,
    /// `2 (sqrt x - 1)^2`
    #[serde(rename = "hellinger")]
    Hellinger,
}

/// Endpoints `a < 1 < b` of the generator domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain {
    pub lower: f64,
    pub upper: f64,
    pub lower_closed: bool,
}

impl Domain {
    pub fn contains(&self, x: f64) -> bool {
        let above = if self.lower_closed {
            x >= self.lower
        } else {
            x > self.lower
        };
        above && x < self.upper
    }
}

/// `(φ(x), φ'(x), φ''(x))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiValues {
    pub value: f64,
    pub deriv1: f64,
    pub deriv2: f64,
}

/// The built-in generators in registry order.
pub fn builtins() -> [Divergence; 5] {
    [
        Divergence::Kl,
        Divergence::KlM,
        Divergence::Chi2,
        Divergence::Chi2M,
        Divergence::Hellinger,
    ]
}

impl Divergence {
    pub fn name(self) -> &'static str {
        match self {
            Divergence::Kl => "kl",
            Divergence::KlM => "kl-m",
            Divergence::Chi2 => "chi2",
            Divergence::Chi2M => "chi2-m",
            Divergence::Hellinger => "hellinger",
        }
    }

    pub fn domain(self) -> Domain {
        match self {
            Divergence::Chi2 => Domain {
                lower: f64::NEG_INFINITY,
                upper: f64::INFINITY,
                lower_closed: false,
            },
            Divergence::Hellinger => Domain {
                lower: 0.0,
                upper: f64::INFINITY,
                lower_closed: true,
            },
            Divergence::Kl | Divergence::KlM | Divergence::Chi2M => Domain {
                lower: 0.0,
                upper: f64::INFINITY,
                lower_closed: false,
            },
        }
    }

    /// Checked evaluation of `(φ, φ', φ'')`.
    pub fn evaluate(self, x: f64) -> Result<PhiValues> {
        if !x.is_finite() || !self.domain().contains(x) {
            return Err(Error::PhiDomain {
                generator: self.name(),
                x,
            });
        }
        let out = PhiValues {
            value: self.value(x),
            deriv1: self.deriv1(x),
            deriv2: self.deriv2(x),
        };
        if out.value.is_finite() && out.deriv1.is_finite() && out.deriv2.is_finite() {
            Ok(out)
        } else {
            Err(Error::PhiDomain {
                generator: self.name(),
                x,
            })
        }
    }

    /// `φ(x)`, using the continuous extension at a finite closed endpoint.
    #[inline]
    pub fn value(self, x: f64) -> f64 {
        match self {
            Divergence::Kl => {
                if x == 0.0 {
                    1.0
                } else {
                    x * x.ln() - x + 1.0
                }
            }
            Divergence::KlM => -x.ln() + x - 1.0,
            Divergence::Chi2 => 0.5 * (x - 1.0) * (x - 1.0),
            Divergence::Chi2M => 0.5 * (x - 1.0) * (x - 1.0) / x,
            Divergence::Hellinger => {
                let r = x.sqrt() - 1.0;
                2.0 * r * r
            }
        }
    }

    #[inline]
    pub fn deriv1(self, x: f64) -> f64 {
        match self {
            Divergence::Kl => x.ln(),
            Divergence::KlM => 1.0 - 1.0 / x,
            Divergence::Chi2 => x - 1.0,
            Divergence::Chi2M => 0.5 * (1.0 - 1.0 / (x * x)),
            Divergence::Hellinger => 2.0 * (1.0 - 1.0 / x.sqrt()),
        }
    }

    #[inline]
    pub fn deriv2(self, x: f64) -> f64 {
        match self {
            Divergence::Kl => 1.0 / x,
            Divergence::KlM => 1.0 / (x * x),
            Divergence::Chi2 => 1.0,
            Divergence::Chi2M => 1.0 / (x * x * x),
            Divergence::Hellinger => 1.0 / (x * x.sqrt()),
        }
    }

    /// Third derivative; only the second θ-derivatives of the criterion need it.
    #[inline]
    pub fn deriv3(self, x: f64) -> f64 {
        match self {
            Divergence::Kl => -1.0 / (x * x),
            Divergence::KlM => -2.0 / (x * x * x),
            Divergence::Chi2 => 0.0,
            Divergence::Chi2M => -3.0 / (x * x * x * x),
            Divergence::Hellinger => -1.5 / (x * x * x.sqrt()),
        }
    }

    /// Convex conjugate `sup_x { t x - φ(x) }`; `f64::INFINITY` where unbounded.
    pub fn conjugate(self, t: f64) -> f64 {
        match self {
            Divergence::Kl => t.exp_m1(),
            Divergence::KlM => {
                if t < 1.0 {
                    -(-t).ln_1p()
                } else {
                    f64::INFINITY
                }
            }
            Divergence::Chi2 => t + 0.5 * t * t,
            Divergence::Chi2M => {
                if t <= 0.5 {
                    1.0 - (1.0 - 2.0 * t).sqrt()
                } else {
                    f64::INFINITY
                }
            }
            Divergence::Hellinger => {
                if t < 2.0 {
                    2.0 * t / (2.0 - t)
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// Exponent `q` with `φ''(x) ~ x^(-q)` as `x -> ∞`.
    pub fn deriv2_decay(self) -> f64 {
        match self {
            Divergence::Kl => 1.0,
            Divergence::KlM => 2.0,
            Divergence::Chi2 => 0.0,
            Divergence::Chi2M => 3.0,
            Divergence::Hellinger => 1.5,
        }
    }

    /// `(x φ''(x), x² φ'''(x))`, finite wherever the limits are.
    #[inline]
    pub fn scaled_derivs(self, x: f64) -> (f64, f64) {
        match self {
            Divergence::Kl => (1.0, -1.0),
            Divergence::KlM => (1.0 / x, -2.0 / x),
            Divergence::Chi2 => (x, 0.0),
            Divergence::Chi2M => {
                let r = 1.0 / (x * x);
                (r, -3.0 * r)
            }
            Divergence::Hellinger => {
                let r = 1.0 / x.sqrt();
                (r, -1.5 * r)
            }
        }
    }

    /// `x φ'(x) - φ(x) = φ*(φ'(x))`, in forms free of cancellation.
    #[inline]
    pub fn conjugate_at_deriv(self, x: f64) -> f64 {
        match self {
            Divergence::Kl => x - 1.0,
            Divergence::KlM => x.ln(),
            Divergence::Chi2 => 0.5 * (x - 1.0) * (x + 1.0),
            Divergence::Chi2M => 1.0 - 1.0 / x,
            Divergence::Hellinger => 2.0 * (x.sqrt() - 1.0),
        }
    }

    /// When `φ'(1/c) = α + β c`, the criterion constant `∫ φ'(1/c_θ)` equals
    /// `α + β` for every proper density and needs no quadrature.
    pub fn affine_dual_constant(self) -> Option<(f64, f64)> {
        match self {
            Divergence::KlM => Some((1.0, -1.0)),
            _ => None,
        }
    }
}

impl fmt::Display for Divergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Divergence {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "kl" => Ok(Divergence::Kl),
            "kl-m" | "klm" => Ok(Divergence::KlM),
            "chi2" => Ok(Divergence::Chi2),
            "chi2-m" | "chi2m" => Ok(Divergence::Chi2M),
            "hellinger" => Ok(Divergence::Hellinger),
            "l1" => Err(Error::InvalidArgument(
                "the L1 divergence is not supported: it is not differentiable at 1".into(),
            )),
            other => Err(Error::InvalidArgument(format!(
                "unknown divergence '{other}' (expected kl, kl-m, chi2, chi2-m or hellinger)"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    // Brute-force sup of t x - φ(x): coarse log grid followed by golden section
    // on the best cell. Returns None when the objective keeps growing at the
    // right end of the grid.
    fn conjugate_oracle(phi: Divergence, t: f64) -> Option<f64> {
        let dom = phi.domain();
        let lo = if dom.lower.is_finite() { dom.lower.max(1e-12) } else { -1e6 };
        let hi: f64 = 1e6;
        let f = |x: f64| t * x - phi.value(x);
        let m = 20_000;
        let grid: Vec<f64> = (0..=m)
            .map(|k| {
                let s = k as f64 / m as f64;
                if lo > 0.0 {
                    (lo.ln() + s * (hi.ln() - lo.ln())).exp()
                } else {
                    lo + s * (hi - lo)
                }
            })
            .collect();
        let (best, _) = grid
            .iter()
            .enumerate()
            .map(|(i, &x)| (i, f(x)))
            .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
        if best == m {
            return None;
        }
        let (mut a, mut b) = (grid[best.saturating_sub(1)], grid[(best + 1).min(m)]);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..200 {
            let c = b - g * (b - a);
            let d = a + g * (b - a);
            if f(c) > f(d) {
                b = d;
            } else {
                a = c;
            }
        }
        Some(f(0.5 * (a + b)))
    }

    #[test]
    fn evaluate_examples() {
        let kl = Divergence::Kl.evaluate(2.0).unwrap();
        assert_relative_eq!(kl.value, 2.0 * 2f64.ln() - 1.0, epsilon = 1e-15);
        assert_relative_eq!(kl.value, 0.3862944, epsilon = 1e-7);

        let chi = Divergence::Chi2.evaluate(1.0).unwrap();
        assert_eq!((chi.value, chi.deriv1, chi.deriv2), (0.0, 0.0, 1.0));

        let h = Divergence::Hellinger.evaluate(2.0).unwrap();
        assert_relative_eq!(h.value, 2.0 * (2f64.sqrt() - 1.0).powi(2), epsilon = 1e-15);
        assert_relative_eq!(h.value, 0.3431458, epsilon = 1e-7);
    }

    #[test]
    fn evaluate_rejects_out_of_domain() {
        for phi in [Divergence::Kl, Divergence::KlM, Divergence::Chi2M] {
            let err = phi.evaluate(-0.5).unwrap_err();
            assert!(matches!(err, Error::PhiDomain { x, .. } if x == -0.5));
            assert!(phi.evaluate(0.0).is_err());
        }
        // closed endpoint, but φ' is infinite there
        assert!(Divergence::Hellinger.evaluate(0.0).is_err());
        assert_eq!(Divergence::Hellinger.value(0.0), 2.0);
        assert_eq!(Divergence::Kl.value(0.0), 1.0);
        assert!(Divergence::Chi2.evaluate(-3.0).is_ok());
        assert!(Divergence::Chi2.evaluate(f64::NAN).is_err());
    }

    #[test]
    fn registry() {
        let all = builtins();
        assert_eq!(all.len(), 5);
        for phi in all {
            let v = phi.evaluate(1.0).unwrap();
            assert_eq!((v.value, v.deriv1, v.deriv2), (0.0, 0.0, 1.0), "{phi}");
            assert_eq!(phi.name().parse::<Divergence>().unwrap(), phi);
        }
        assert!("l1".parse::<Divergence>().is_err());
        assert!(!all.iter().any(|p| p.name() == "l1"));
    }

    #[test]
    fn conjugate_examples() {
        assert_eq!(Divergence::Chi2.conjugate(0.0), 0.0);
        assert_eq!(Divergence::Hellinger.conjugate(2.0), f64::INFINITY);
        assert!(conjugate_oracle(Divergence::Hellinger, 2.0).is_none());
        for t in [-3.0, -1.0, -0.2, 0.0, 0.3, 0.7, 0.95] {
            let exact = Divergence::KlM.conjugate(t);
            assert_relative_eq!(exact, -(1.0 - t).ln(), epsilon = 1e-14);
            let oracle = conjugate_oracle(Divergence::KlM, t).unwrap();
            assert!((exact - oracle).abs() < 1e-7, "t={t}: {exact} vs {oracle}");
        }
        assert_eq!(Divergence::KlM.conjugate(1.5), f64::INFINITY);
    }

    #[test]
    fn conjugates_match_grid_oracle() {
        for phi in builtins() {
            for t in [-2.0, -0.5, 0.0, 0.25, 0.45] {
                let exact = phi.conjugate(t);
                let oracle = conjugate_oracle(phi, t).unwrap();
                assert!(
                    (exact - oracle).abs() <= 1e-6 * (1.0 + exact.abs()),
                    "{phi} t={t}: {exact} vs {oracle}"
                );
            }
        }
    }

    #[test]
    fn second_derivative_matches_finite_difference() {
        let mut state = 0x2545F4914F6CDD1Du64;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for phi in builtins() {
            for _ in 0..100 {
                let x = 0.05 + next() * 19.95;
                let h = 1e-5 * x;
                let fd2 = (phi.deriv1(x + h) - phi.deriv1(x - h)) / (2.0 * h);
                let fd3 = (phi.deriv2(x + h) - phi.deriv2(x - h)) / (2.0 * h);
                let d2 = phi.deriv2(x);
                assert!((fd2 - d2).abs() <= 1e-6 * d2.abs().max(1e-300), "{phi} x={x}");
                let d3 = phi.deriv3(x);
                assert!((fd3 - d3).abs() <= 1e-6 * d3.abs().max(1e-12), "{phi} x={x}");
                let fd1 = (phi.value(x + h) - phi.value(x - h)) / (2.0 * h);
                assert!((fd1 - phi.deriv1(x)).abs() <= 1e-6 * phi.deriv1(x).abs().max(1e-6));
            }
        }
    }

    #[test]
    fn fenchel_young_equality_on_grid() {
        for phi in builtins() {
            for k in 1..200 {
                let x = k as f64 * 0.05;
                let t = phi.deriv1(x);
                let lhs = phi.conjugate(t);
                let rhs = x * t - phi.value(x);
                assert!((lhs - rhs).abs() <= 1e-8, "{phi} x={x}: {lhs} vs {rhs}");
                let (a, b) = phi.scaled_derivs(x);
                assert!((a - x * phi.deriv2(x)).abs() <= 1e-12 * a.abs().max(1.0));
                assert!((b - x * x * phi.deriv3(x)).abs() <= 1e-12 * b.abs().max(1.0));
                let k2 = phi.conjugate_at_deriv(x);
                assert!((k2 - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()), "{phi} x={x}");
            }
        }
    }

    #[test]
    fn affine_constant_reproduces_derivative() {
        let (a, b) = Divergence::KlM.affine_dual_constant().unwrap();
        for c in [0.1, 0.7, 1.0, 3.0] {
            assert_relative_eq!(Divergence::KlM.deriv1(1.0 / c), a + b * c, epsilon = 1e-14);
        }
        assert!(Divergence::Hellinger.affine_dual_constant().is_none());
    }

    proptest! {
        #[test]
        fn convexity(x1 in 0.01f64..30.0, dx in 0.001f64..30.0, lambda in 0.0f64..1.0, idx in 0usize..5) {
            let phi = builtins()[idx];
            let x2 = x1 + dx;
            let mid = lambda * x1 + (1.0 - lambda) * x2;
            let lhs = phi.value(mid);
            let rhs = lambda * phi.value(x1) + (1.0 - lambda) * phi.value(x2);
            prop_assert!(lhs <= rhs + 1e-12 * (1.0 + rhs.abs()));
            prop_assert!(phi.deriv2(mid) >= 0.0);
        }

        #[test]
        fn fenchel_inequality(x in 0.01f64..30.0, t in -5.0f64..5.0, idx in 0usize..5) {
            let phi = builtins()[idx];
            let conj = phi.conjugate(t);
            prop_assert!(t * x <= phi.value(x) + conj + 1e-9 * (1.0 + conj.abs().min(1e300)));
        }
    }
}
