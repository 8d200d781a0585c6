//! Shared numerical kernels: unit-square quadrature, bounded scalar
//! maximization, distribution functions and the one-sample KS distance.

mod ks;
mod optimize;
mod quadrature;
mod special;

pub use ks::ks_statistic;
pub use optimize::{maximize_scalar, Maximum, OptimizerSettings};
pub use quadrature::{
    gauss_legendre, graded_line_rule, graded_line_rule_with, integrate2d, QuadPoint, QuadratureRule, DEFAULT_ORDER,
};
pub use special::{
    chisq_cdf, chisq_quantile, chisq_sf, normal_cdf, normal_pdf, normal_quantile,
};
