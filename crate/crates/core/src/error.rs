use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("divergence {generator}: argument {x} is outside the generator domain")]
    PhiDomain { generator: &'static str, x: f64 },

    #[error("copula {family}: parameter {theta} is outside the {space} parameter space")]
    ParameterDomain {
        family: &'static str,
        theta: f64,
        space: &'static str,
    },

    #[error("point ({u1}, {u2}) is not strictly inside the unit square")]
    ArgumentDomain { u1: f64, u2: f64 },

    #[error("at least 2 observations are required, got {0}")]
    InsufficientData(usize),

    #[error("observation {index} contains a non-finite coordinate")]
    NonFiniteData { index: usize },

    #[error("integrand is not finite ({value}) at ({u1}, {u2})")]
    NonFiniteEvaluation { u1: f64, u2: f64, value: f64 },

    #[error("no admissible point: the objective is -inf on the whole search grid")]
    NoAdmissiblePoint,

    #[error("curvature matrix S is singular or not positive definite (S = {0}); the criterion is flat at the estimate")]
    SingularCurvature(f64),

    #[error("covariance estimate is not positive semidefinite (Xi = {0})")]
    NotPositiveSemidefinite(f64),

    #[error("power approximation needs an alternative with positive divergence, got D = {0}")]
    NoAlternative(f64),

    #[error("target power {beta} is not reachable for sample sizes up to {max_n}")]
    PowerUnreachable { beta: f64, max_n: f64 },

    #[error("{0}")]
    InvalidArgument(String),
}
