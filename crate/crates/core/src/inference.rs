//! The independence statistic `T_n = 2n D̂ / φ''(1)`, its χ² calibration,
//! the normal approximation to the power function and the sample-size
//! solver.

use serde::{Deserialize, Serialize};

use crate::criterion::CriterionContext;
use crate::estimator::{population_components, EstimateResult, VarianceComponents};
use crate::error::{Error, Result};
use crate::numeric::{chisq_quantile, chisq_sf, normal_cdf, normal_quantile};

/// Upper end of the sample-size search.
pub const MAX_SAMPLE_SIZE: f64 = 1e9;
const MIN_SAMPLE_SIZE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub t_n: f64,
    pub df: usize,
    pub p_value: f64,
    pub alpha: f64,
    pub q_crit: f64,
    pub reject: bool,
    /// `√σ̂²`, reported when the null is rejected and components are known.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_hat: Option<f64>,
    pub decision: String,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerQuery {
    /// `D_φ(θ₀, θ_T)`.
    pub d: f64,
    /// `σ_φ(θ₀, θ_T)`.
    pub sigma: f64,
    pub n: f64,
    pub alpha: f64,
    /// Target power for sizing.
    pub beta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleSize {
    /// Smallest integer sample size whose approximate power reaches `beta`.
    pub n_star: u64,
    /// Real root of `power(n) = beta`.
    pub n0: f64,
    /// The printed closed form `((a+b) - √(a(a+2b))) / (2D²)` with
    /// `a = σ z²`, `b = q D`, `z = Φ⁻¹(1-β)`, reported as is.
    pub n0_closed_form: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerAt {
    pub theta_alt: f64,
    pub d: f64,
    pub sigma: f64,
    pub n: f64,
    pub alpha: f64,
    pub power: f64,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

/// `T_n`, its p-value against `χ²_1` and the decision at level `alpha`.
pub fn independence_test(
    result: &EstimateResult,
    components: Option<&VarianceComponents>,
    alpha: f64,
) -> Result<TestReport> {
    check_alpha(alpha)?;
    let df = 1;
    let curvature = result.divergence.deriv2(1.0);
    let t_n = (2.0 * result.n as f64 * result.d_hat / curvature).max(0.0);
    let q_crit = chisq_quantile(1.0 - alpha, df as f64)?;
    let p_value = chisq_sf(t_n, df as f64).clamp(f64::MIN_POSITIVE, 1.0);
    let reject = t_n > q_crit;
    let mut warnings = result.warnings.clone();
    if !result.converged {
        warnings.push("the fit did not converge; the test decision is unreliable".into());
    }
    let decision = if reject {
        format!("reject independence at level {alpha}")
    } else {
        format!("fail to reject independence at level {alpha}")
    };
    Ok(TestReport {
        t_n,
        df,
        p_value,
        alpha,
        q_crit,
        reject,
        sigma_hat: components.filter(|_| reject).map(|c| c.sigma2.max(0.0).sqrt()),
        decision,
        warnings,
    })
}

impl PowerQuery {
    fn validate(&self, sizing: bool) -> Result<()> {
        if !(self.d > 0.0) || !self.d.is_finite() {
            return Err(Error::NoAlternative(self.d));
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::InvalidArgument(format!("sigma must be positive, got {}", self.sigma)));
        }
        check_alpha(self.alpha)?;
        if sizing {
            if !(self.beta > self.alpha && self.beta < 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "target power must lie in (alpha, 1) = ({}, 1), got {}",
                    self.alpha, self.beta
                )));
            }
        } else if !(self.n > 0.0) || !self.n.is_finite() {
            return Err(Error::InvalidArgument(format!("n must be positive, got {}", self.n)));
        }
        Ok(())
    }
}

/// `1 - Φ((√n / σ)(q_{1-α} / (2n) - D))`; `q` is the χ²_1 critical value.
fn power_formula(d: f64, sigma: f64, q: f64, n: f64) -> f64 {
    1.0 - normal_cdf(n.sqrt() / sigma * (q / (2.0 * n) - d))
}

/// Approximate power of the level-`alpha` test at sample size `q.n`.
pub fn power_approx(q: &PowerQuery) -> Result<f64> {
    q.validate(false)?;
    let crit = chisq_quantile(1.0 - q.alpha, 1.0)?;
    Ok(power_formula(q.d, q.sigma, crit, q.n))
}

/// Solves `power(n) = beta` by bisection in `log n` on `[1e-12, 1e9]`; the
/// power is strictly increasing in `n`.
pub fn sample_size(q: &PowerQuery) -> Result<SampleSize> {
    q.validate(true)?;
    let crit = chisq_quantile(1.0 - q.alpha, 1.0)?;
    let power = |n: f64| power_formula(q.d, q.sigma, crit, n);
    if power(MAX_SAMPLE_SIZE) < q.beta {
        return Err(Error::PowerUnreachable {
            beta: q.beta,
            max_n: MAX_SAMPLE_SIZE,
        });
    }
    let (mut lo, mut hi) = (MIN_SAMPLE_SIZE.ln(), MAX_SAMPLE_SIZE.ln());
    if power(MIN_SAMPLE_SIZE) >= q.beta {
        hi = lo;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if power(mid.exp()) >= q.beta {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-15 * hi.abs().max(1.0) {
            break;
        }
    }
    let n0 = hi.exp();
    // smallest integer reaching beta; ⌊n0⌋ + 1 unless n0 is an integer
    let mut n_star = (n0.floor() as u64 + 1).max(1);
    while n_star > 1 && power((n_star - 1) as f64) >= q.beta {
        n_star -= 1;
    }
    while power(n_star as f64) < q.beta {
        n_star += 1;
    }
    let z = normal_quantile(1.0 - q.beta)?;
    let a = q.sigma * z * z;
    let b = crit * q.d;
    let n0_closed_form = ((a + b) - (a * (a + 2.0 * b)).sqrt()) / (2.0 * q.d * q.d);
    Ok(SampleSize {
        n_star,
        n0,
        n0_closed_form,
    })
}

/// Approximate power at the alternative `theta_alt`, with `D` and `σ²`
/// computed by quadrature under `c_{θ_alt}`.
pub fn test_power_at(ctx: &CriterionContext, theta_alt: f64, n: usize, alpha: f64) -> Result<PowerAt> {
    check_alpha(alpha)?;
    if theta_alt == ctx.model().theta0() {
        return Err(Error::NoAlternative(0.0));
    }
    let pc = population_components(ctx, theta_alt)?;
    let q = PowerQuery {
        d: pc.d,
        sigma: pc.sigma2.sqrt(),
        n: n as f64,
        alpha,
        beta: 0.5,
    };
    let power = power_approx(&q)?;
    Ok(PowerAt {
        theta_alt,
        d: q.d,
        sigma: q.sigma,
        n: q.n,
        alpha,
        power,
    })
}
