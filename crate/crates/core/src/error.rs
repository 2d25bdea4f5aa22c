use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported function family: {0}")]
    UnsupportedFamily(String),

    #[error("degenerate interval [{a}, {b}]")]
    DegenerateInterval { a: f64, b: f64 },

    #[error("feature `{0}` is not enabled in this build")]
    FeatureDisabled(&'static str),

    #[error("rank collapse: the derived space has numerical dimension {0}")]
    RankCollapse(usize),

    #[error("no monomial up to degree {0} is independent of the space")]
    AugmentationFailed(usize),

    #[error("integral did not converge: estimate {error_estimate:e} after {subdivisions} subdivisions")]
    IntegrationFailed { error_estimate: f64, subdivisions: usize },

    #[error("non-finite function value at x = {0}")]
    NonFinite(f64),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid nodes: {0}")]
    InvalidNodes(String),

    #[error("numerically singular Hermite-Vandermonde matrix (condition {0:e})")]
    SingularVandermonde(f64),

    #[error("Newton iteration did not converge in {iterations} iterations (residual {residual:e})")]
    MaxIterations { iterations: usize, residual: f64 },

    #[error("damped Newton step could not preserve node ordering")]
    OrderingViolated,

    #[error("non-positive weight {weight:e} at node {node}")]
    NonPositiveWeight { node: f64, weight: f64 },

    #[error("measure continuation stalled at t = {t} (step {step:e})")]
    HomotopyStall { t: f64, step: f64 },

    #[error("Tchebyshev screen failed (min scaled determinant {0:e}); use the force flag to override")]
    TchebyshevFail(f64),

    #[error("rank-deficient collocation matrix: {0}")]
    RankDeficient(String),

    #[error("rule and space are inconsistent: exactness residual {0:e}")]
    InconsistentRule(f64),

    #[error("singular auxiliary system: {0}")]
    SingularAuxiliary(String),

    #[error("solution blew up at t = {t} (energy {energy:e})")]
    BlowUp { t: f64, energy: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
