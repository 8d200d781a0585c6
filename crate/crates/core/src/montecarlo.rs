//! Replication engine for the limit laws: the `χ²_1` null law of `T_n`, the
//! normal law of `√n (θ̂ - θ_T) / √Ξ̂`, Wald coverage and power.
//!
//! Replication `r` draws from a ChaCha8 stream selected by `(seed, r)`, so
//! results do not depend on scheduling or thread count.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::copula::Copula;
use crate::criterion::{CriterionContext, DEFAULT_CLAMP_EPS};
use crate::divergence::Divergence;
use crate::error::{Error, Result};
use crate::estimator::{fit, variance_components, wald_interval};
use crate::inference::independence_test;
use crate::numeric::{
    chisq_cdf, ks_statistic, normal_cdf, OptimizerSettings, QuadratureRule, DEFAULT_ORDER,
};
use crate::pseudo::{pseudo_observations, RankScaling, TiePolicy};

pub const MIN_STUDY_N: usize = 20;
/// Failure share above which the summary carries a warning.
const FAILURE_WARNING_SHARE: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StudyMode {
    /// Data from `θ₀`; collects `T_n` and compares with `χ²_1`.
    Null,
    /// Data from `θ_T`; collects `√n (θ̂ - θ_T) / √Ξ̂` and compares with N(0, 1).
    Alternative,
}

impl std::str::FromStr for StudyMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "null" => Ok(Self::Null),
            "alternative" => Ok(Self::Alternative),
            _ => Err(Error::InvalidArgument(format!(
                "unknown study mode '{s}'; expected null or alternative"
            ))),
        }
    }
}

/// How replications are scheduled. Both give identical summaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// Rayon work-stealing over replications; sequential when the
    /// `parallel` feature is disabled.
    #[default]
    Parallel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub mode: StudyMode,
    pub family: Copula,
    pub divergence: Divergence,
    pub theta_true: f64,
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    pub alpha: f64,
    /// Wald interval level for coverage in alternative mode.
    pub level: f64,
    pub quad_order: usize,
    pub clamp_eps: f64,
    pub pseudo_mode: RankScaling,
    pub optimizer: OptimizerSettings,
}

impl StudyConfig {
    pub fn new(
        mode: StudyMode,
        family: Copula,
        divergence: Divergence,
        theta_true: f64,
        n: usize,
        reps: usize,
        seed: u64,
    ) -> Self {
        Self {
            mode,
            family,
            divergence,
            theta_true,
            n,
            reps,
            seed,
            alpha: 0.05,
            level: 0.95,
            quad_order: DEFAULT_ORDER,
            clamp_eps: DEFAULT_CLAMP_EPS,
            pseudo_mode: RankScaling::NPlusOne,
            optimizer: OptimizerSettings::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.reps < 1 {
            return Err(Error::InvalidArgument("reps must be at least 1".into()));
        }
        if self.n < MIN_STUDY_N {
            return Err(Error::InvalidArgument(format!(
                "studies need n >= {MIN_STUDY_N}, got {}",
                self.n
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) || !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "alpha and level must lie in (0, 1), got {} and {}",
                self.alpha, self.level
            )));
        }
        self.optimizer.validate()?;
        if self.mode == StudyMode::Alternative {
            self.family.natural_space().contains(self.theta_true).then_some(()).ok_or(
                Error::ParameterDomain {
                    family: self.family.name(),
                    theta: self.theta_true,
                    space: "natural",
                },
            )?;
        }
        Ok(())
    }
}

/// Alternative-mode summaries of `θ̂` around `θ_T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlternativeSummary {
    pub mean_theta_hat: f64,
    /// Empirical variance of `√n (θ̂ - θ_T)`.
    pub variance_root_n_error: f64,
    /// Mean plug-in `Ξ̂`.
    pub mean_xi: f64,
    /// Share of Wald intervals at `level` that cover `θ_T`.
    pub coverage: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudySummary {
    pub config: StudyConfig,
    /// Sorted `T_n` (null) or standardized estimates (alternative).
    pub statistics: Vec<f64>,
    /// Share of successful replications with `T_n > q_{1-α}`.
    pub rejection_rate: f64,
    /// KS distance of `statistics` to `χ²_1` (null) or N(0, 1) (alternative).
    pub ks_to_reference: f64,
    pub mean: f64,
    pub variance: f64,
    pub failures: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub alternative: Option<AlternativeSummary>,
    pub warnings: Vec<String>,
    /// Wall-clock seconds; not serialized and ignored by equality.
    #[serde(skip)]
    pub runtime_seconds: f64,
}

impl PartialEq for StudySummary {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config
            && self.statistics == other.statistics
            && self.rejection_rate == other.rejection_rate
            && self.ks_to_reference == other.ks_to_reference
            && self.mean == other.mean
            && self.variance == other.variance
            && self.failures == other.failures
            && self.alternative == other.alternative
            && self.warnings == other.warnings
    }
}

#[derive(Debug, Clone, Copy)]
struct Replication {
    t_n: f64,
    reject: bool,
    theta_hat: f64,
    xi: Option<f64>,
}

fn replicate(config: &StudyConfig, theta: f64, ctx: &CriterionContext, r: usize) -> Result<Replication> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(r as u64);
    let data = config.family.sample_with(theta, config.n, &mut rng)?;
    let sample = pseudo_observations(&data, config.pseudo_mode, TiePolicy::Midrank)?;
    let est = fit(ctx, &sample, &config.optimizer)?;
    if !est.converged {
        return Err(Error::InvalidArgument("optimizer did not converge".into()));
    }
    let test = independence_test(&est, None, config.alpha)?;
    let xi = match config.mode {
        StudyMode::Null => None,
        StudyMode::Alternative => Some(variance_components(ctx, &sample, est.theta_hat)?.xi),
    };
    Ok(Replication {
        t_n: test.t_n,
        reject: test.reject,
        theta_hat: est.theta_hat,
        xi,
    })
}

fn run_replications<F>(reps: usize, execution: Execution, f: F) -> Vec<Result<Replication>>
where
    F: Fn(usize) -> Result<Replication> + Sync + Send,
{
    match execution {
        Execution::Sequential => (0..reps).map(f).collect(),
        Execution::Parallel => crate::exec::map_range(reps, f),
    }
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 {
        v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var)
}

/// Runs the study with the default (parallel) execution.
pub fn run_study(config: &StudyConfig) -> Result<StudySummary> {
    run_study_with(config, Execution::default())
}

/// Single-threaded replay of [`run_study`]; equal to it for every config.
pub fn reproduce(config: &StudyConfig) -> Result<StudySummary> {
    run_study_with(config, Execution::Sequential)
}

pub fn run_study_with(config: &StudyConfig, execution: Execution) -> Result<StudySummary> {
    let start = Instant::now();
    config.validate()?;
    let mut config = *config;
    let mut warnings = Vec::new();
    if config.mode == StudyMode::Null && config.theta_true != config.family.theta0() {
        warnings.push(format!(
            "null mode samples at theta0 = {}; theta_true = {} was replaced",
            config.family.theta0(),
            config.theta_true
        ));
        config.theta_true = config.family.theta0();
    }
    let rule = QuadratureRule::new(config.quad_order)?;
    let ctx = CriterionContext::new(config.family, config.divergence, rule, config.clamp_eps)?;
    let theta = config.theta_true;

    let outcomes = run_replications(config.reps, execution, |r| replicate(&config, theta, &ctx, r));
    let ok: Vec<Replication> = outcomes.iter().filter_map(|o| o.as_ref().ok().copied()).collect();
    let failures = config.reps - ok.len();
    if failures as f64 > FAILURE_WARNING_SHARE * config.reps as f64 {
        let first = outcomes.iter().find_map(|o| o.as_ref().err()).expect("a failure exists");
        warnings.push(format!(
            "{failures} of {} replications failed (first error: {first})",
            config.reps
        ));
    }
    if ok.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "all {} replications failed",
            config.reps
        )));
    }
    let rejection_rate = ok.iter().filter(|r| r.reject).count() as f64 / ok.len() as f64;
    let root_n = (config.n as f64).sqrt();

    let (mut statistics, alternative) = match config.mode {
        StudyMode::Null => (ok.iter().map(|r| r.t_n).collect::<Vec<_>>(), None),
        StudyMode::Alternative => {
            let errors: Vec<f64> = ok.iter().map(|r| root_n * (r.theta_hat - theta)).collect();
            let xis: Vec<f64> = ok.iter().map(|r| r.xi.expect("alternative mode")).collect();
            let standardized: Vec<f64> = errors.iter().zip(&xis).map(|(e, xi)| e / xi.sqrt()).collect();
            let covered = ok
                .iter()
                .zip(&xis)
                .filter(|(r, &xi)| {
                    wald_interval(r.theta_hat, xi, config.n, config.level)
                        .map(|(lo, hi)| lo <= theta && theta <= hi)
                        .unwrap_or(false)
                })
                .count();
            let (mean_theta_hat, _) = mean_var(&ok.iter().map(|r| r.theta_hat).collect::<Vec<_>>());
            let (_, variance_root_n_error) = mean_var(&errors);
            let (mean_xi, _) = mean_var(&xis);
            (
                standardized,
                Some(AlternativeSummary {
                    mean_theta_hat,
                    variance_root_n_error,
                    mean_xi,
                    coverage: covered as f64 / ok.len() as f64,
                }),
            )
        }
    };
    statistics.sort_by(f64::total_cmp);
    let ks_to_reference = match config.mode {
        StudyMode::Null => ks_statistic(&statistics, |t| chisq_cdf(t, 1.0))?,
        StudyMode::Alternative => ks_statistic(&statistics, normal_cdf)?,
    };
    let (mean, variance) = mean_var(&statistics);
    Ok(StudySummary {
        config,
        statistics,
        rejection_rate,
        ks_to_reference,
        mean,
        variance,
        failures,
        alternative,
        warnings,
        runtime_seconds: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(mode: StudyMode, reps: usize, seed: u64) -> StudyConfig {
        let theta = if mode == StudyMode::Null { 0.0 } else { 2.0 };
        StudyConfig::new(mode, Copula::Clayton, Divergence::KlM, theta, 60, reps, seed)
    }

    #[test]
    fn deterministic_across_execution() {
        for mode in [StudyMode::Null, StudyMode::Alternative] {
            let c = small(mode, 12, 7);
            let a = run_study_with(&c, Execution::Parallel).unwrap();
            let b = run_study_with(&c, Execution::Sequential).unwrap();
            assert_eq!(a, b);
            assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
            assert_eq!(reproduce(&c).unwrap(), a);
        }
    }

    #[test]
    fn seeds_give_different_statistics() {
        let a = run_study(&small(StudyMode::Null, 8, 1)).unwrap();
        let b = run_study(&small(StudyMode::Null, 8, 2)).unwrap();
        assert_ne!(a.statistics, b.statistics);
    }

    #[test]
    fn single_replication() {
        let s = run_study(&small(StudyMode::Null, 1, 3)).unwrap();
        assert_eq!(s.statistics.len(), 1);
        assert!(s.rejection_rate == 0.0 || s.rejection_rate == 1.0);
        assert!((0.0..=1.0).contains(&s.ks_to_reference));
    }

    #[test]
    fn null_mode_forces_theta0() {
        let mut c = small(StudyMode::Null, 2, 3);
        c.theta_true = 1.5;
        let s = run_study(&c).unwrap();
        assert_eq!(s.config.theta_true, 0.0);
        assert!(s.warnings.iter().any(|w| w.contains("replaced")));
    }

    #[test]
    fn invalid_configs() {
        let mut c = small(StudyMode::Null, 0, 1);
        assert!(run_study(&c).is_err());
        c.reps = 2;
        c.n = 10;
        assert!(run_study(&c).is_err());
        let c = StudyConfig::new(StudyMode::Alternative, Copula::Clayton, Divergence::KlM, -0.3, 50, 2, 1);
        assert!(run_study(&c).is_err());
    }

    #[test]
    fn summary_round_trips_through_json() {
        let s = run_study(&small(StudyMode::Alternative, 4, 9)).unwrap();
        let back: StudySummary = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(back, s);
        assert!(s.alternative.is_some());
        assert_eq!(s.statistics.len() + s.failures, 4);
    }
}
