//! Subcommand execution.

use std::fmt::Write as _;
use std::fs;

use anyhow::{Context, Result};

use copdiv::copula::AdmissibilityStatus;
use copdiv::estimator::population_components;
use copdiv::inference::test_power_at;
use copdiv::montecarlo::run_study;
use copdiv::{
    fit, independence_test, pseudo_observations, sample_size, variance_components, CriterionContext,
    EstimateResult, OptimizerSettings, PowerQuery, PseudoSample, QuadratureRule, StudyConfig, StudyMode, TiePolicy,
    VarianceComponents,
};

use crate::config::{Command, RunConfig};
use crate::ingest::ingest_csv;
use crate::report::Report;

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

fn context(cfg: &RunConfig) -> Result<CriterionContext> {
    let rule = QuadratureRule::new(cfg.quad_order).context("quadrature rule")?;
    let family = cfg.family.context("--family is required")?;
    let phi = cfg.divergence.context("--divergence is required")?;
    Ok(CriterionContext::new(family, phi, rule, cfg.clamp_eps)?)
}

fn settings(cfg: &RunConfig) -> OptimizerSettings {
    OptimizerSettings {
        theta_tol: cfg.tol,
        multistart: cfg.multistart,
        ..OptimizerSettings::default()
    }
}

fn theta(cfg: &RunConfig) -> Result<f64> {
    cfg.theta.first().copied().context("--theta is required")
}

/// Runs a validated configuration. `sample` also writes its CSV.
pub fn dispatch(cfg: &RunConfig) -> Result<Report> {
    cfg.validate().map_err(anyhow::Error::msg)?;
    let mut report = Report::new(cfg.clone());
    match cfg.subcommand {
        Command::Fit | Command::Test => estimate(cfg, &mut report)?,
        Command::Power => power(cfg, &mut report)?,
        Command::Samplesize => samplesize(cfg, &mut report)?,
        Command::Sample => sample(cfg, &mut report)?,
        Command::Simulate => simulate(cfg, &mut report)?,
    }
    Ok(report)
}

fn admissibility(ctx: &CriterionContext, theta: f64, warnings: &mut Vec<String>) {
    let probe = ctx.model().validate_theta_e(ctx.phi(), theta);
    if probe.status == AdmissibilityStatus::SuspectDivergent {
        warnings.push(format!(
            "the integral of |phi'(1/c)| at theta = {theta} grows with the quadrature order ({:?}); theta may lie outside the extended space",
            probe.abs_integrals
        ));
    }
}

fn estimate(cfg: &RunConfig, report: &mut Report) -> Result<()> {
    let path = cfg.data_path.as_deref().context("--data is required")?;
    let data = ingest_csv(path)?;
    let sample: PseudoSample =
        pseudo_observations(&data, cfg.pseudo_mode, TiePolicy::Midrank).context("pseudo-observations")?;
    let ctx = context(cfg)?;
    let est: EstimateResult = fit(&ctx, &sample, &settings(cfg)).context("estimation")?;
    let mut warnings = Vec::new();
    let components: Option<VarianceComponents> = match variance_components(&ctx, &sample, est.theta_hat) {
        Ok(v) => Some(v),
        Err(e) => {
            warnings.push(format!("standard error unavailable: {e}"));
            None
        }
    };
    report.n = Some(est.n);
    report.theta_hat = Some(vec![est.theta_hat]);
    report.d_hat = finite(est.d_hat);
    report.converged = Some(est.converged);
    report.at_boundary = Some(est.at_boundary);
    if let Some(c) = &components {
        report.se = finite((c.xi / est.n as f64).sqrt()).map(|se| vec![se]);
        report.sigma2_hat = finite(c.sigma2);
    }
    if cfg.subcommand == Command::Test {
        let test = independence_test(&est, components.as_ref(), cfg.alpha).context("independence test")?;
        report.t_n = Some(test.t_n);
        report.df = Some(test.df);
        report.p_value = Some(test.p_value);
        report.reject = Some(test.reject);
        report.decision = Some(test.decision);
        report.alpha = Some(test.alpha);
        report.warnings = test.warnings;
    } else {
        report.warnings = est.warnings;
    }
    report.warnings.extend(warnings);
    admissibility(&ctx, est.theta_hat, &mut report.warnings);
    Ok(())
}

fn power(cfg: &RunConfig, report: &mut Report) -> Result<()> {
    let ctx = context(cfg)?;
    let t = theta(cfg)?;
    let n = cfg.n.context("--n is required")?;
    let p = test_power_at(&ctx, t, n, cfg.alpha).context("power approximation")?;
    report.n = Some(n);
    report.alpha = Some(cfg.alpha);
    report.d = Some(p.d);
    report.sigma = Some(p.sigma);
    report.power = Some(p.power);
    report.warnings.extend(ctx.admissibility_warning(t));
    admissibility(&ctx, t, &mut report.warnings);
    Ok(())
}

fn samplesize(cfg: &RunConfig, report: &mut Report) -> Result<()> {
    let ctx = context(cfg)?;
    let t = theta(cfg)?;
    let pc = population_components(&ctx, t).context("population components")?;
    let q = PowerQuery {
        d: pc.d,
        sigma: pc.sigma2.sqrt(),
        n: 1.0,
        alpha: cfg.alpha,
        beta: cfg.beta.context("--beta is required")?,
    };
    let s = sample_size(&q).context("sample size")?;
    report.alpha = Some(cfg.alpha);
    report.d = Some(q.d);
    report.sigma = Some(q.sigma);
    report.n_star = Some(s.n_star);
    report.n0 = Some(s.n0);
    report.n0_closed_form = finite(s.n0_closed_form);
    report.warnings.extend(ctx.admissibility_warning(t));
    admissibility(&ctx, t, &mut report.warnings);
    Ok(())
}

fn sample(cfg: &RunConfig, report: &mut Report) -> Result<()> {
    let family = cfg.family.context("--family is required")?;
    let t = cfg.theta.first().copied().unwrap_or(family.theta0());
    let n = cfg.n.context("--n is required")?;
    let seed = cfg.seed.context("a seed is required")?;
    let out = cfg.out.as_deref().context("--out is required")?;
    let pairs = family.sample(t, n, seed).context("sampling")?;
    let mut csv = String::from("u1,u2\n");
    for (u, v) in &pairs {
        writeln!(csv, "{u},{v}").expect("writing to a String");
    }
    fs::write(out, csv).with_context(|| format!("cannot write {}", out.display()))?;
    report.n = Some(n);
    report.written = Some(out.display().to_string());
    Ok(())
}

fn simulate(cfg: &RunConfig, report: &mut Report) -> Result<()> {
    let family = cfg.family.context("--family is required")?;
    let phi = cfg.divergence.context("--divergence is required")?;
    let t = cfg.theta.first().copied().unwrap_or(family.theta0());
    let mode = if t == family.theta0() { StudyMode::Null } else { StudyMode::Alternative };
    let mut study = StudyConfig::new(
        mode,
        family,
        phi,
        t,
        cfg.n.context("--n is required")?,
        cfg.reps.context("--reps is required")?,
        cfg.seed.context("a seed is required")?,
    );
    study.alpha = cfg.alpha;
    study.quad_order = cfg.quad_order;
    study.clamp_eps = cfg.clamp_eps;
    study.pseudo_mode = cfg.pseudo_mode;
    study.optimizer = settings(cfg);
    let summary = run_study(&study).context("simulation")?;
    report.n = Some(study.n);
    report.alpha = Some(study.alpha);
    report.warnings = summary.warnings.clone();
    report.study = Some(summary);
    Ok(())
}
