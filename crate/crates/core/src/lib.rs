//! Dual φ-divergence estimation and independence testing for semiparametric
//! bivariate copula models with unknown margins.
//!
//! The data pathway is always the same: raw pairs are reduced to rank-based
//! pseudo-observations ([`pseudo`]), a [`criterion::CriterionContext`] binds a
//! divergence generator ([`divergence`]) to a copula family ([`copula`]), and
//! the [`estimator`] maximizes the empirical dual criterion over the extended
//! parameter space. [`inference`] turns the maximum into the independence
//! statistic `T_n`, and [`montecarlo`] replicates the whole pipeline to check
//! the limit laws empirically.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod copula;
pub mod criterion;
pub mod divergence;
pub mod error;
pub mod estimator;
mod exec;
pub mod inference;
pub mod montecarlo;
pub mod numeric;
pub mod pseudo;


pub use copula::{Copula, DensityDerivs, Interval};
pub use criterion::CriterionContext;
pub use divergence::Divergence;
pub use error::{Error, Result};
pub use estimator::{fit, variance_components, EstimateResult, VarianceComponents};
pub use inference::{independence_test, power_approx, sample_size, PowerQuery, TestReport};
pub use montecarlo::{run_study, StudyConfig, StudyMode, StudySummary};
pub use numeric::{OptimizerSettings, QuadratureRule};
pub use pseudo::{pseudo_observations, PseudoSample, RankScaling, TiePolicy};
