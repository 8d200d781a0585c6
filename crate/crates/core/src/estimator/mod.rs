//! Dual φ-divergence estimation: `θ̂ = argmax_θ ∫ m(θ, ·) dC_n` over the
//! admissible box and `D̂ = ∫ m(θ̂, ·) dC_n`.

mod variance;

pub use variance::{
    population_components, strip_integrals, strip_integrals_quadrature, variance_components, PopulationComponents,
    StripValues, VarianceComponents,
};

use serde::{Deserialize, Serialize};

use crate::copula::Copula;
use crate::criterion::CriterionContext;
use crate::divergence::Divergence;
use crate::error::{Error, Result};
use crate::numeric::{maximize_scalar, normal_quantile, OptimizerSettings};
use crate::pseudo::PseudoSample;

/// Gradient residual above which an interior optimum is flagged.
const FOC_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub family: Copula,
    pub divergence: Divergence,
    pub n: usize,
    pub theta_hat: f64,
    /// `D̂_φ(θ₀, θ_T)`, the maximized criterion.
    pub d_hat: f64,
    pub criterion_value: f64,
    pub converged: bool,
    pub iterations: usize,
    pub gradient: f64,
    pub gradient_norm: f64,
    pub hessian: f64,
    pub at_boundary: bool,
    pub warnings: Vec<String>,
}

/// Maximizes the empirical criterion over `ctx.search_box()`.
pub fn fit(
    ctx: &CriterionContext,
    sample: &PseudoSample,
    settings: &OptimizerSettings,
) -> Result<EstimateResult> {
    settings.validate()?;
    let theta0 = ctx.model().theta0();
    let mut warnings = sample.warnings();
    let search = ctx.search_box();

    let q0 = ctx.empirical_criterion(sample, theta0)?;
    let mut state = FitState {
        theta_hat: theta0,
        value: q0,
        converged: true,
        iterations: 0,
        excluded: 0,
        bounds: None,
    };
    if search.is_degenerate() {
        warnings.push(format!(
            "the {} family has a single parameter value; nothing to estimate",
            ctx.model()
        ));
        return finish(ctx, sample, settings, state, warnings);
    }
    let (lo, hi) = search.closed_bounds();
    let mut excluded = 0;
    let g = |t: f64| match ctx.empirical_criterion(sample, t) {
        Ok(v) if v > f64::NEG_INFINITY => v,
        _ => {
            excluded += 1;
            f64::NEG_INFINITY
        }
    };
    let best = maximize_scalar(g, lo, hi, settings)?;
    // the sup dominates the value at θ₀
    if best.value >= q0 {
        state.theta_hat = best.argmax;
        state.value = best.value;
        state.converged = best.converged;
    }
    state.iterations = best.iterations;
    state.excluded = excluded;
    state.bounds = Some((lo, hi));
    finish(ctx, sample, settings, state, warnings)
}

struct FitState {
    theta_hat: f64,
    value: f64,
    converged: bool,
    iterations: usize,
    excluded: usize,
    bounds: Option<(f64, f64)>,
}

fn finish(
    ctx: &CriterionContext,
    sample: &PseudoSample,
    settings: &OptimizerSettings,
    st: FitState,
    mut warnings: Vec<String>,
) -> Result<EstimateResult> {
    let (gradient, hessian) = ctx
        .empirical_criterion_derivs(sample, st.theta_hat)
        .unwrap_or((f64::NAN, f64::NAN));
    let at_boundary = st.bounds.is_some_and(|(lo, hi)| {
        let slack = 10.0 * settings.theta_tol + 1e-7 * st.theta_hat.abs();
        st.theta_hat - lo <= slack || hi - st.theta_hat <= slack
    });
    if st.excluded > 0 {
        warnings.push(format!(
            "{} criterion evaluations were excluded because the density fell below clamp_eps = {:e} at a pseudo-observation",
            st.excluded,
            ctx.clamp_eps()
        ));
    }
    if at_boundary {
        warnings.push(format!(
            "theta_hat = {} lies on the edge of the search box {}; no first-order check applied",
            st.theta_hat,
            ctx.search_box()
        ));
    } else if !st.converged {
        warnings.push(format!(
            "optimizer did not converge within {} iterations",
            settings.max_iter
        ));
    } else if !(gradient.abs() <= FOC_TOLERANCE) {
        warnings.push(format!(
            "first-order condition residual {gradient:e} exceeds {FOC_TOLERANCE:e}"
        ));
    }
    if hessian.is_infinite() {
        warnings.push(format!(
            "the criterion is not twice differentiable at theta_hat = {}; curvature reported as infinite",
            st.theta_hat
        ));
    }
    if let Some(w) = ctx.admissibility_warning(st.theta_hat) {
        warnings.push(w);
    }
    Ok(EstimateResult {
        family: ctx.model(),
        divergence: ctx.phi(),
        n: sample.n(),
        theta_hat: st.theta_hat,
        d_hat: st.value,
        criterion_value: st.value,
        converged: st.converged || at_boundary,
        iterations: st.iterations,
        gradient,
        gradient_norm: gradient.abs(),
        hessian,
        at_boundary,
        warnings,
    })
}

/// Wald interval `θ̂ ± z_{(1+level)/2} √(Ξ/n)`.
pub fn confidence_interval(
    result: &EstimateResult,
    components: &VarianceComponents,
    level: f64,
) -> Result<(f64, f64)> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "confidence level must lie in (0, 1), got {level}"
        )));
    }
    wald_interval(result.theta_hat, components.xi, result.n, level)
}

pub fn wald_interval(theta_hat: f64, xi: f64, n: usize, level: f64) -> Result<(f64, f64)> {
    if !(xi >= 0.0) {
        return Err(Error::NotPositiveSemidefinite(xi));
    }
    let z = normal_quantile(0.5 * (1.0 + level))?;
    let half = z * (xi / n as f64).sqrt();
    Ok((theta_hat - half, theta_hat + half))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pseudo::{pseudo_observations, RankScaling, TiePolicy};

    fn pseudo(model: Copula, theta: f64, n: usize, seed: u64) -> PseudoSample {
        let data = model.sample(theta, n, seed).unwrap();
        pseudo_observations(&data, RankScaling::NPlusOne, TiePolicy::Midrank).unwrap()
    }

    /// Golden-section maximization of the mean pseudo-log-likelihood.
    fn mpl_oracle(model: Copula, s: &PseudoSample, lo: f64, hi: f64) -> f64 {
        let f = |t: f64| {
            s.points()
                .iter()
                .map(|&(u, v)| model.density_unchecked(t, u, v).ln())
                .sum::<f64>()
        };
        // coarse scan, then golden section on the best bracket
        let k = 400;
        let grid: Vec<f64> = (0..=k).map(|i| lo + (hi - lo) * i as f64 / k as f64).collect();
        let best = (0..=k)
            .max_by(|&a, &b| f(grid[a]).total_cmp(&f(grid[b])))
            .unwrap();
        let (mut a, mut b) = (grid[best.saturating_sub(1)], grid[(best + 1).min(k)]);
        let r = (5f64.sqrt() - 1.0) / 2.0;
        while b - a > 1e-10 {
            let c = b - r * (b - a);
            let d = a + r * (b - a);
            if f(c) >= f(d) {
                b = d;
            } else {
                a = c;
            }
        }
        0.5 * (a + b)
    }

    #[test]
    fn kl_m_matches_pseudo_likelihood() {
        for (model, t) in [(Copula::Clayton, 2.0), (Copula::Frank, -3.0), (Copula::Fgm, 0.6)] {
            let ctx = CriterionContext::with_defaults(model, Divergence::KlM);
            for seed in 0..4 {
                let s = pseudo(model, t, 200, seed);
                let fit = fit(&ctx, &s, &OptimizerSettings::default()).unwrap();
                let (lo, hi) = ctx.search_box().closed_bounds();
                let oracle = mpl_oracle(model, &s, lo, hi);
                assert!(
                    (fit.theta_hat - oracle).abs() <= 1e-6,
                    "{model} seed {seed}: {} vs {oracle}",
                    fit.theta_hat
                );
            }
        }
    }

    #[test]
    fn independence_data_gives_small_theta() {
        let ctx = CriterionContext::with_defaults(Copula::Clayton, Divergence::KlM);
        let mut ok = 0;
        for seed in 0..100 {
            let s = pseudo(Copula::Independence, 0.0, 500, 1000 + seed);
            let f = fit(&ctx, &s, &OptimizerSettings::default()).unwrap();
            assert!(f.d_hat >= 0.0);
            if f.theta_hat.abs() <= 0.2 {
                ok += 1;
            }
        }
        assert!(ok >= 95, "{ok}");
    }

    #[test]
    fn sup_dominates_theta0_and_first_order_condition() {
        for phi in [Divergence::KlM, Divergence::Hellinger, Divergence::Kl] {
            let ctx = CriterionContext::with_defaults(Copula::Clayton, phi);
            for seed in 0..3 {
                let s = pseudo(Copula::Clayton, 1.5, 300, seed);
                let f = fit(&ctx, &s, &OptimizerSettings::default()).unwrap();
                let q0 = ctx.empirical_criterion(&s, 0.0).unwrap();
                assert!(f.d_hat >= q0 - 1e-12);
                assert!(f.converged && !f.at_boundary);
                assert!(f.gradient_norm <= 1e-6, "{phi}: {}", f.gradient_norm);
            }
        }
    }

    #[test]
    fn invariant_under_monotone_transforms() {
        let data = Copula::Frank.sample(4.0, 250, 9).unwrap();
        let moved: Vec<(f64, f64)> = data.iter().map(|&(u, v)| ((u / (1.0 - u)).ln(), v.powi(3))).collect();
        let ctx = CriterionContext::with_defaults(Copula::Frank, Divergence::Hellinger);
        let a = pseudo_observations(&data, RankScaling::NPlusOne, TiePolicy::Midrank).unwrap();
        let b = pseudo_observations(&moved, RankScaling::NPlusOne, TiePolicy::Midrank).unwrap();
        let s = OptimizerSettings::default();
        assert_eq!(fit(&ctx, &a, &s).unwrap().theta_hat, fit(&ctx, &b, &s).unwrap().theta_hat);
    }

    #[test]
    fn boundary_and_degenerate_boxes() {
        // Clayton/kl searches [0, 20]; negatively dependent data pin θ̂ at 0
        let ctx = CriterionContext::with_defaults(Copula::Clayton, Divergence::Kl);
        let s = pseudo(Copula::Frank, -5.0, 200, 2);
        let f = fit(&ctx, &s, &OptimizerSettings::default()).unwrap();
        assert!(f.at_boundary && f.converged, "{f:?}");
        assert_eq!(f.theta_hat, 0.0);
        assert_eq!(f.d_hat, 0.0);
        assert!(f.warnings.iter().any(|w| w.contains("edge")));

        let ctx = CriterionContext::with_defaults(Copula::Independence, Divergence::KlM);
        let f = fit(&ctx, &s, &OptimizerSettings::default()).unwrap();
        assert_eq!((f.theta_hat, f.d_hat), (0.0, 0.0));
    }

    #[test]
    fn wald_interval_examples() {
        let (a, b) = wald_interval(2.0, 1.0, 100, 0.95).unwrap();
        assert!((a - 1.804).abs() < 1e-3 && (b - 2.196).abs() < 1e-3);
        assert!((b - 2.0 - 1.959964 / 10.0).abs() < 1e-6);
        let (c, d) = wald_interval(2.0, 1.0, 400, 0.95).unwrap();
        assert!(((d - c) * 2.0 - (b - a)).abs() < 1e-14);
        assert!(matches!(wald_interval(2.0, -1.0, 10, 0.9), Err(Error::NotPositiveSemidefinite(_))));
    }
}
