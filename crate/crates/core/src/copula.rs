//! Parametric bivariate copula families.
//!
//! All built-in families have a scalar parameter, independence at `θ = 0`,
//! exchangeable densities, and closed-form conditional inverses for exact
//! sampling. Density derivatives are analytic; a central-difference
//! fallback is kept for cross-checking.

use std::fmt;
use std::str::FromStr;

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::divergence::Divergence;
use crate::error::{Error, Result};
use crate::numeric::{graded_line_rule, QuadratureRule};

/// Upper end of the Clayton search box; `τ = 10/11` there.
const CLAYTON_CAP: f64 = 20.0;
/// Frank search box half-width; `|τ| ≈ 0.89` there.
const FRANK_CAP: f64 = 35.0;
/// Inward nudge applied to open endpoints of a search box.
const OPEN_NUDGE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Copula {
    Independence,
    Clayton,
    Frank,
    Fgm,
}

/// A real interval with optionally open, possibly infinite endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
    pub lower_open: bool,
    pub upper_open: bool,
}

impl Interval {
    pub const fn closed(lower: f64, upper: f64) -> Self {
        Self {
            lower,
            upper,
            lower_open: false,
            upper_open: false,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        let above = if self.lower_open || self.lower.is_infinite() {
            x > self.lower
        } else {
            x >= self.lower
        };
        let below = if self.upper_open || self.upper.is_infinite() {
            x < self.upper
        } else {
            x <= self.upper
        };
        above && below
    }

    pub fn is_degenerate(&self) -> bool {
        self.lower >= self.upper
    }

    /// Closed finite box obtained by moving open endpoints inward.
    pub fn closed_bounds(&self) -> (f64, f64) {
        let lo = if self.lower_open {
            self.lower + OPEN_NUDGE
        } else {
            self.lower
        };
        let hi = if self.upper_open {
            self.upper - OPEN_NUDGE
        } else {
            self.upper
        };
        (lo, hi)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let l = if self.lower_open || self.lower.is_infinite() { '(' } else { '[' };
        let r = if self.upper_open || self.upper.is_infinite() { ')' } else { ']' };
        write!(f, "{l}{}, {}{r}", self.lower, self.upper)
    }
}

/// `c` and its first/second partials at one point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DensityDerivs {
    pub c: f64,
    pub d_theta: f64,
    pub d2_theta: f64,
    pub d_u1: f64,
    pub d_u2: f64,
    pub d2_theta_u1: f64,
    pub d2_theta_u2: f64,
}

impl DensityDerivs {
    fn independence() -> Self {
        Self {
            c: 1.0,
            ..Default::default()
        }
    }

    fn is_finite(&self) -> bool {
        [
            self.c,
            self.d_theta,
            self.d2_theta,
            self.d_u1,
            self.d_u2,
            self.d2_theta_u1,
            self.d2_theta_u2,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdmissibilityStatus {
    Admissible,
    SuspectDivergent,
}

/// Nested-grid probe of `∫∫ |φ'(1/c_θ)|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub theta: f64,
    pub orders: [usize; 3],
    /// `∫∫ |φ'(1/c_θ)|` for each order.
    pub abs_integrals: [f64; 3],
    /// `∫∫ φ'(1/c_θ)` for each order.
    pub integrals: [f64; 3],
    pub status: AdmissibilityStatus,
}

pub fn families() -> [Copula; 4] {
    [
        Copula::Independence,
        Copula::Clayton,
        Copula::Frank,
        Copula::Fgm,
    ]
}

impl Copula {
    pub fn name(self) -> &'static str {
        match self {
            Copula::Independence => "independence",
            Copula::Clayton => "clayton",
            Copula::Frank => "frank",
            Copula::Fgm => "fgm",
        }
    }

    pub fn dim(self) -> usize {
        1
    }

    pub fn theta0(self) -> f64 {
        0.0
    }

    /// Θ: parameters for which `C_θ` is a copula.
    pub fn natural_space(self) -> Interval {
        match self {
            Copula::Independence => Interval::closed(0.0, 0.0),
            Copula::Clayton => Interval::closed(0.0, f64::INFINITY),
            Copula::Frank => Interval::closed(f64::NEG_INFINITY, f64::INFINITY),
            Copula::Fgm => Interval::closed(-1.0, 1.0),
        }
    }

    /// Θₑ: parameters for which the density formula stays a nonnegative
    /// function on the square.
    pub fn extended_space(self) -> Interval {
        match self {
            Copula::Clayton => Interval {
                lower: -0.5,
                upper: f64::INFINITY,
                lower_open: true,
                upper_open: true,
            },
            other => other.natural_space(),
        }
    }

    /// Bounded subset of Θₑ on which `∫ |φ'(1/c_θ)|` is finite for the given
    /// generator, clipped to a finite cap. This is the box the estimator
    /// searches.
    pub fn admissible_box(self, phi: Divergence) -> Interval {
        let open_neg_half = |upper: f64, upper_open: bool| Interval {
            lower: -0.5,
            upper,
            lower_open: true,
            upper_open,
        };
        match self {
            Copula::Independence => Interval::closed(0.0, 0.0),
            Copula::Clayton => match phi {
                Divergence::KlM | Divergence::Hellinger => open_neg_half(CLAYTON_CAP, false),
                // φ'(∞) = ∞ on the zero-support region that opens up for θ < 0
                Divergence::Kl => Interval::closed(0.0, CLAYTON_CAP),
                // ∫ 1/c diverges at the (0,1) and (1,0) corners once θ ≥ 1
                Divergence::Chi2 => Interval {
                    lower: 0.0,
                    upper: 1.0,
                    lower_open: false,
                    upper_open: true,
                },
                // ∫ c² diverges at the origin for every θ > 0
                Divergence::Chi2M => open_neg_half(0.0, false),
            },
            Copula::Frank => Interval::closed(-FRANK_CAP, FRANK_CAP),
            Copula::Fgm => Interval::closed(-1.0, 1.0),
        }
    }

    fn check_theta(self, theta: f64, space: Interval, label: &'static str) -> Result<()> {
        if theta.is_finite() && space.contains(theta) {
            Ok(())
        } else {
            Err(Error::ParameterDomain {
                family: self.name(),
                theta,
                space: label,
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

    /// Checked density: `θ ∈ Θₑ`, `u` strictly inside the square.
    pub fn density(self, theta: f64, u1: f64, u2: f64) -> Result<f64> {
        self.check_theta(theta, self.extended_space(), "extended")?;
        Self::check_point(u1, u2)?;
        Ok(self.density_unchecked(theta, u1, u2))
    }

    /// Density without argument checks.
    #[inline]
    pub fn density_unchecked(self, theta: f64, u1: f64, u2: f64) -> f64 {
        if theta == 0.0 {
            return 1.0;
        }
        match self {
            Copula::Independence => 1.0,
            Copula::Clayton => clayton_log_density(theta, u1, u2).exp(),
            Copula::Frank => frank_log_density(theta, u1, u2).exp(),
            Copula::Fgm => 1.0 + theta * ((1.0 - 2.0 * u1) * (1.0 - 2.0 * u2)),
        }
    }

    /// Checked analytic partials.
    pub fn density_derivs(self, theta: f64, u1: f64, u2: f64) -> Result<DensityDerivs> {
        self.check_theta(theta, self.extended_space(), "extended")?;
        Self::check_point(u1, u2)?;
        let d = self.density_derivs_unchecked(theta, u1, u2);
        if d.is_finite() {
            Ok(d)
        } else {
            Err(Error::NonFiniteEvaluation {
                u1,
                u2,
                value: d.c,
            })
        }
    }

    #[inline]
    pub fn density_derivs_unchecked(self, theta: f64, u1: f64, u2: f64) -> DensityDerivs {
        match self {
            Copula::Independence => DensityDerivs::independence(),
            Copula::Clayton => clayton_derivs(theta, u1, u2),
            Copula::Frank => frank_derivs(theta, u1, u2),
            Copula::Fgm => {
                let a = 1.0 - 2.0 * u1;
                let b = 1.0 - 2.0 * u2;
                DensityDerivs {
                    c: 1.0 + theta * (a * b),
                    d_theta: a * b,
                    d2_theta: 0.0,
                    d_u1: -2.0 * theta * b,
                    d_u2: -2.0 * theta * a,
                    d2_theta_u1: -2.0 * b,
                    d2_theta_u2: -2.0 * a,
                }
            }
        }
    }

    /// Central-difference partials with step `h`; for tests only.
    pub fn density_derivs_fd(self, theta: f64, u1: f64, u2: f64, h: f64) -> DensityDerivs {
        let c = |t: f64, a: f64, b: f64| self.density_unchecked(t, a, b);
        let c0 = c(theta, u1, u2);
        let mixed = |du1: f64, du2: f64| {
            (c(theta + h, u1 + du1, u2 + du2) - c(theta + h, u1 - du1, u2 - du2)
                - c(theta - h, u1 + du1, u2 + du2)
                + c(theta - h, u1 - du1, u2 - du2))
                / (4.0 * h * h)
        };
        DensityDerivs {
            c: c0,
            d_theta: (c(theta + h, u1, u2) - c(theta - h, u1, u2)) / (2.0 * h),
            d2_theta: (c(theta + h, u1, u2) - 2.0 * c0 + c(theta - h, u1, u2)) / (h * h),
            d_u1: (c(theta, u1 + h, u2) - c(theta, u1 - h, u2)) / (2.0 * h),
            d_u2: (c(theta, u1, u2 + h) - c(theta, u1, u2 - h)) / (2.0 * h),
            d2_theta_u1: mixed(h, 0.0),
            d2_theta_u2: mixed(0.0, h),
        }
    }

    /// Exponent `p` with `c_θ ~ dist^p` at a support edge that moves with θ;
    /// `None` when the support is the whole square.
    pub fn support_edge_order(self, theta: f64) -> Option<f64> {
        match self {
            Copula::Clayton if theta < 0.0 => Some(-1.0 / theta - 2.0),
            _ => None,
        }
    }

    /// Lower edge `v0(u1)` of the support in the `u2` direction: the density
    /// vanishes for `u2 < v0`. Zero for families with full support.
    pub fn support_floor(self, theta: f64, u1: f64) -> f64 {
        match self {
            Copula::Clayton if theta < 0.0 => {
                let a = -theta;
                ((-(a * u1.ln()).exp()).ln_1p() / a).exp()
            }
            _ => 0.0,
        }
    }

    /// `C_θ(u1, u2)`.
    pub fn cdf(self, theta: f64, u1: f64, u2: f64) -> f64 {
        if theta == 0.0 {
            return u1 * u2;
        }
        match self {
            Copula::Independence => u1 * u2,
            Copula::Clayton => match clayton_log_a(theta, u1.ln(), u2.ln()) {
                Some(l) => (-l / theta).exp(),
                None => 0.0,
            },
            Copula::Frank => {
                let num = (-theta * u1).exp_m1() * (-theta * u2).exp_m1();
                -(num / (-theta).exp_m1()).ln_1p() / theta
            }
            Copula::Fgm => u1 * u2 * (1.0 + theta * (1.0 - u1) * (1.0 - u2)),
        }
    }

    /// Solves `∂C_θ/∂u1 (u1, u2) = w` for `u2`.
    pub fn conditional_inverse(self, theta: f64, u1: f64, w: f64) -> f64 {
        if theta == 0.0 {
            return w;
        }
        let v = match self {
            Copula::Independence => w,
            Copula::Clayton => {
                let k = -theta / (1.0 + theta) * w.ln();
                let log1p_b = if theta > 0.0 {
                    let lb = -theta * u1.ln() + k.exp_m1().ln();
                    if lb > 30.0 {
                        lb + (-lb).exp().ln_1p()
                    } else {
                        lb.exp().ln_1p()
                    }
                } else {
                    ((-theta * u1.ln()).exp() * k.exp_m1()).ln_1p()
                };
                (-log1p_b / theta).exp()
            }
            Copula::Frank => {
                let denom = w + (1.0 - w) * (-theta * u1).exp();
                -(w * (-theta).exp_m1() / denom).ln_1p() / theta
            }
            Copula::Fgm => {
                let a = theta * (1.0 - 2.0 * u1);
                let b = 1.0 + a;
                2.0 * w / (b + (b * b - 4.0 * a * w).sqrt())
            }
        };
        v.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
    }

    /// `n` exact draws by conditional inversion, deterministic in `seed`.
    pub fn sample(self, theta: f64, n: usize, seed: u64) -> Result<Vec<(f64, f64)>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_with(theta, n, &mut rng)
    }

    pub fn sample_with<R: Rng + ?Sized>(
        self,
        theta: f64,
        n: usize,
        rng: &mut R,
    ) -> Result<Vec<(f64, f64)>> {
        self.check_theta(theta, self.natural_space(), "natural")?;
        if n == 0 {
            return Err(Error::InvalidArgument("sample size must be at least 1".into()));
        }
        Ok((0..n)
            .map(|_| {
                let w1: f64 = rng.sample(Open01);
                let w2: f64 = rng.sample(Open01);
                (w1, self.conditional_inverse(theta, w1, w2))
            })
            .collect())
    }

    /// Kendall's τ for `θ ∈ Θ`.
    pub fn kendall_tau(self, theta: f64) -> Result<f64> {
        self.check_theta(theta, self.natural_space(), "natural")?;
        Ok(match self {
            Copula::Independence => 0.0,
            Copula::Clayton => theta / (theta + 2.0),
            Copula::Fgm => 2.0 * theta / 9.0,
            Copula::Frank if theta == 0.0 => 0.0,
            Copula::Frank => {
                // τ = 4 E[C(U1, U2)] - 1, integrated in conditional coordinates
                let (x, w) = graded_line_rule(128);
                let mut e = 0.0;
                for (&u, &wu) in x.iter().zip(&w) {
                    for (&t, &wt) in x.iter().zip(&w) {
                        let v = self.conditional_inverse(theta, u, t);
                        e += wu * wt * self.cdf(theta, u, v);
                    }
                }
                4.0 * e - 1.0
            }
        })
    }

    /// Probes the finiteness of `∫∫ |φ'(1/c_θ)|` on nested grids. A
    /// diagnostic, not a proof.
    pub fn validate_theta_e(self, phi: Divergence, theta: f64) -> AdmissibilityReport {
        let orders = [32, 64, 128];
        let mut abs_integrals = [0.0; 3];
        let mut integrals = [0.0; 3];
        for (k, &order) in orders.iter().enumerate() {
            let rule = QuadratureRule::new(order).expect("fixed orders are valid");
            let (mut a, mut s) = (0.0, 0.0);
            for p in rule.points() {
                let c = self.density_unchecked(theta, p.u1, p.u2);
                let v = phi.deriv1(1.0 / c);
                a += p.w * v.abs();
                s += p.w * v;
            }
            abs_integrals[k] = a;
            integrals[k] = s;
        }
        let stable = abs_integrals.iter().all(|v| v.is_finite()) && {
            let (m, f) = (abs_integrals[1], abs_integrals[2]);
            (f - m).abs() <= 1e-3 * f.abs().max(m.abs()) || f.abs().max(m.abs()) <= 1e-12
        };
        AdmissibilityReport {
            theta,
            orders,
            abs_integrals,
            integrals,
            status: if stable {
                AdmissibilityStatus::Admissible
            } else {
                AdmissibilityStatus::SuspectDivergent
            },
        }
    }
}

impl fmt::Display for Copula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Copula {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "independence" => Ok(Copula::Independence),
            "clayton" => Ok(Copula::Clayton),
            "frank" => Ok(Copula::Frank),
            "fgm" => Ok(Copula::Fgm),
            other => Err(Error::InvalidArgument(format!(
                "unknown family '{other}' (expected independence, clayton, frank or fgm)"
            ))),
        }
    }
}

// ---------------------------------------------------------------- Clayton
//
// With a = ln u1, b = ln u2 and A = u1^{-θ} + u2^{-θ} - 1 = e^{-θa} + e^{-θb} - 1,
// ln c = ln(1+θ) - (1+θ)(a+b) - (1/θ + 2) ln A.

/// Stable `ln A`, `e^{-θa}/A`, `e^{-θb}/A`; `None` on the zero-support region.
#[inline]
fn clayton_a_parts(theta: f64, a: f64, b: f64) -> Option<(f64, f64, f64)> {
    let x = -theta * a;
    let y = -theta * b;
    let m = x.max(y);
    if m < 1.0 {
        let s = x.exp_m1() + y.exp_m1();
        if s <= -1.0 {
            return None;
        }
        let big_a = 1.0 + s;
        Some((s.ln_1p(), x.exp() / big_a, y.exp() / big_a))
    } else {
        let ex = (x - m).exp();
        let ey = (y - m).exp();
        let scaled = ex + ey - (-m).exp();
        Some((m + scaled.ln(), ex / scaled, ey / scaled))
    }
}

#[inline]
fn clayton_log_a(theta: f64, a: f64, b: f64) -> Option<f64> {
    clayton_a_parts(theta, a, b).map(|p| p.0)
}

#[inline]
fn clayton_log_density(theta: f64, u1: f64, u2: f64) -> f64 {
    let a = u1.ln();
    let b = u2.ln();
    match clayton_log_a(theta, a, b) {
        Some(l) => theta.ln_1p() - (1.0 + theta) * (a + b) - l / theta - 2.0 * l,
        None => f64::NEG_INFINITY,
    }
}

/// `g = ln A / θ` and its first two θ-derivatives. Near θ = 0 the closed
/// forms cancel catastrophically, so the cumulant series of `ln A` is used.
fn clayton_g(theta: f64, a: f64, b: f64, l: f64, l1: f64, l2: f64) -> (f64, f64, f64) {
    if theta.abs() * a.abs().max(b.abs()) < 0.05 {
        const N: usize = 14;
        // ln A = Σ κ_k θ^k / k!, with κ the cumulants of the "moments"
        // α_k = (-a)^k + (-b)^k of the exponential sum.
        let mut alpha = [0.0; N + 1];
        let (mut pa, mut pb) = (1.0, 1.0);
        for item in alpha.iter_mut().skip(1) {
            pa *= -a;
            pb *= -b;
            *item = pa + pb;
        }
        let mut kappa = [0.0; N + 1];
        let mut binom = [[0.0; N + 1]; N + 1];
        for n in 0..=N {
            binom[n][0] = 1.0;
            for k in 1..=n {
                binom[n][k] = binom[n - 1][k - 1] + if k < n { binom[n - 1][k] } else { 0.0 };
            }
        }
        for n in 1..=N {
            let mut s = alpha[n];
            for k in 1..n {
                s -= binom[n - 1][k - 1] * kappa[k] * alpha[n - k];
            }
            kappa[n] = s;
        }
        let (mut g, mut g1, mut g2) = (0.0, 0.0, 0.0);
        let mut fact = 1.0;
        for (k, &kk) in kappa.iter().enumerate().skip(1) {
            fact *= k as f64;
            let c = kk / fact;
            let kf = k as f64;
            g += c * theta.powi(k as i32 - 1);
            if k >= 2 {
                g1 += c * (kf - 1.0) * theta.powi(k as i32 - 2);
            }
            if k >= 3 {
                g2 += c * (kf - 1.0) * (kf - 2.0) * theta.powi(k as i32 - 3);
            }
        }
        (g, g1, g2)
    } else {
        let t2 = theta * theta;
        (
            l / theta,
            (theta * l1 - l) / t2,
            (t2 * l2 - 2.0 * theta * l1 + 2.0 * l) / (t2 * theta),
        )
    }
}

fn clayton_derivs(theta: f64, u1: f64, u2: f64) -> DensityDerivs {
    let a = u1.ln();
    let b = u2.ln();
    let Some((l, ex, ey)) = clayton_a_parts(theta, a, b) else {
        return DensityDerivs::default();
    };
    // θ-derivatives of ln A
    let l1 = -a * ex - b * ey;
    let l2 = a * a * ex + b * b * ey - l1 * l1;
    let (g, g1, g2) = clayton_g(theta, a, b, l, l1, l2);
    let tp = 1.0 + theta;
    let ell = tp.ln() - tp * (a + b) - g - 2.0 * l;
    let ell_t = 1.0 / tp - (a + b) - g1 - 2.0 * l1;
    let ell_tt = -1.0 / (tp * tp) - g2 - 2.0 * l2;
    let k = 1.0 + 2.0 * theta;
    let ell_u1 = (-tp + k * ex) / u1;
    let ell_u2 = (-tp + k * ey) / u2;
    let ell_tu1 = (-1.0 + ex * (2.0 + k * (-a - l1))) / u1;
    let ell_tu2 = (-1.0 + ey * (2.0 + k * (-b - l1))) / u2;
    let c = ell.exp();
    DensityDerivs {
        c,
        d_theta: c * ell_t,
        d2_theta: c * (ell_tt + ell_t * ell_t),
        d_u1: c * ell_u1,
        d_u2: c * ell_u2,
        d2_theta_u1: c * (ell_tu1 + ell_t * ell_u1),
        d2_theta_u2: c * (ell_tu2 + ell_t * ell_u2),
    }
}

// ------------------------------------------------------------------ Frank
//
// With p(x) = (1 - e^{-x})/x and u1 ≤ u2 (by exchangeability),
// c = p(θ) e^{-θ(u1+u2)} / N², N = e^{-θ u1} u2 p(θ u2) + e^{-θ u2} (1-u2) p(θ(1-u2)).
// Both terms of N are positive for every θ, so nothing cancels.

/// `p(x) = (1 - e^{-x})/x` with its first two derivatives.
#[inline]
fn frank_p(x: f64) -> (f64, f64, f64) {
    if x.abs() < 0.5 {
        // p(x) = Σ (-x)^k / (k+1)!
        let mut p = 0.0;
        let mut p1 = 0.0;
        let mut p2 = 0.0;
        let mut coef = 1.0; // (-1)^k / (k+1)!
        let mut xk = [1.0; 3]; // x^k, x^{k-1}, x^{k-2} bookkeeping below
        for k in 0..22 {
            let kf = k as f64;
            if k > 0 {
                coef *= -1.0 / (kf + 1.0);
            }
            p += coef * xk[0];
            if k >= 1 {
                p1 += coef * kf * xk[1];
            }
            if k >= 2 {
                p2 += coef * kf * (kf - 1.0) * xk[2];
            }
            if k >= 1 {
                xk[2] = xk[1];
            }
            xk[1] = xk[0];
            xk[0] *= x;
        }
        (p, p1, p2)
    } else {
        let e = (-x).exp();
        let p = -(-x).exp_m1() / x;
        let p1 = (e - p) / x;
        let p2 = (-e - 2.0 * p1) / x;
        (p, p1, p2)
    }
}

#[inline]
fn frank_log_density(theta: f64, u1: f64, u2: f64) -> f64 {
    let (s, t) = if u1 <= u2 { (u1, u2) } else { (u2, u1) };
    let n = (-theta * s).exp() * t * frank_p(theta * t).0
        + (-theta * t).exp() * (1.0 - t) * frank_p(theta * (1.0 - t)).0;
    frank_p(theta).0.ln() - theta * (s + t) - 2.0 * n.ln()
}

/// Second-order jet in `(θ, u)`: value, ∂θ, ∂θθ, ∂u, ∂θu.
#[derive(Debug, Clone, Copy)]
struct Jet {
    v: f64,
    t: f64,
    tt: f64,
    u: f64,
    tu: f64,
}

impl Jet {
    fn constant(v: f64) -> Self {
        Self {
            v,
            t: 0.0,
            tt: 0.0,
            u: 0.0,
            tu: 0.0,
        }
    }

    fn chain(self, f: f64, f1: f64, f2: f64) -> Self {
        Self {
            v: f,
            t: f1 * self.t,
            tt: f1 * self.tt + f2 * self.t * self.t,
            u: f1 * self.u,
            tu: f1 * self.tu + f2 * self.t * self.u,
        }
    }

    fn exp(self) -> Self {
        let e = self.v.exp();
        self.chain(e, e, e)
    }

    fn ln(self) -> Self {
        self.chain(self.v.ln(), 1.0 / self.v, -1.0 / (self.v * self.v))
    }

    fn p(self) -> Self {
        let (p, p1, p2) = frank_p(self.v);
        self.chain(p, p1, p2)
    }

    fn scale(self, k: f64) -> Self {
        Self {
            v: k * self.v,
            t: k * self.t,
            tt: k * self.tt,
            u: k * self.u,
            tu: k * self.tu,
        }
    }
}

impl std::ops::Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        Jet {
            v: self.v + o.v,
            t: self.t + o.t,
            tt: self.tt + o.tt,
            u: self.u + o.u,
            tu: self.tu + o.tu,
        }
    }
}

impl std::ops::Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        self + o.scale(-1.0)
    }
}

impl std::ops::Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        Jet {
            v: self.v * o.v,
            t: self.t * o.v + self.v * o.t,
            tt: self.tt * o.v + 2.0 * self.t * o.t + self.v * o.tt,
            u: self.u * o.v + self.v * o.u,
            tu: self.tu * o.v + self.t * o.u + self.u * o.t + self.v * o.tu,
        }
    }
}

/// Jet of `ln c` where `s ≤ t` are the ordered arguments.
fn frank_log_jet(theta: Jet, s: Jet, t: Jet) -> Jet {
    let one = Jet::constant(1.0);
    let n = (theta * s).scale(-1.0).exp() * t * (theta * t).p()
        + (theta * t).scale(-1.0).exp() * (one - t) * (theta * (one - t)).p();
    theta.p().ln() - theta * (s + t) - n.ln().scale(2.0)
}

fn frank_derivs(theta: f64, u1: f64, u2: f64) -> DensityDerivs {
    let th = Jet {
        v: theta,
        t: 1.0,
        tt: 0.0,
        u: 0.0,
        tu: 0.0,
    };
    let var = |x: f64| Jet {
        v: x,
        t: 0.0,
        tt: 0.0,
        u: 1.0,
        tu: 0.0,
    };
    // derivative with respect to `active`, the other argument held fixed
    let log_jet = |active: f64, other: f64| {
        if active <= other {
            frank_log_jet(th, var(active), Jet::constant(other))
        } else {
            frank_log_jet(th, Jet::constant(other), var(active))
        }
    };
    let j1 = log_jet(u1, u2);
    let j2 = log_jet(u2, u1);
    if theta == 0.0 {
        // c ≡ 1 on the independence slice; only the θ-partials survive
        return DensityDerivs {
            d_theta: j1.t,
            d2_theta: j1.tt + j1.t * j1.t,
            d2_theta_u1: j1.tu,
            d2_theta_u2: j2.tu,
            ..DensityDerivs::independence()
        };
    }
    let c = j1.v.exp();
    DensityDerivs {
        c,
        d_theta: c * j1.t,
        d2_theta: c * (j1.tt + j1.t * j1.t),
        d_u1: c * j1.u,
        d_u2: c * j2.u,
        d2_theta_u1: c * (j1.tu + j1.t * j1.u),
        d2_theta_u2: c * (j2.tu + j2.t * j2.u),
    }
}
