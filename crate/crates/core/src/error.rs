use thiserror::Error;

/// Errors raised by model construction, linear algebra and experiment configuration.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error(
        "singular configuration at node {node}: vanishing denominator with nonzero form factor \
         (refine with an infrared cutoff sigma0 > 0)"
    )]
    SingularConfiguration { node: usize },

    #[error("self-energy counterterm diverges: {0}")]
    CountertermDivergence(String),

    #[error("Fock space dimension {dimension} exceeds the configured budget of {budget} states")]
    Capacity { dimension: u128, budget: usize },

    #[error("renormalized metric is numerically indefinite (condition estimate {condition:e})")]
    MetricDegeneracy { condition: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("eigensolver did not converge after {iterations} iterations (max residual {residual:e})")]
    Solver { iterations: usize, residual: f64 },

    #[error("matrix is not normal: ||B*B - BB*|| = {defect:e} exceeds {limit:e}")]
    NotNormal { defect: f64, limit: f64 },

    #[error("matrix is not Hermitian: ||A - A*|| = {defect:e}")]
    NotHermitian { defect: f64 },

    #[error("resolvent shift {re}{im:+}i lies on the real axis")]
    SingularShift { re: f64, im: f64 },

    #[error("rate fit needs at least 3 positive points, got {0}")]
    Fit(usize),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("sweep point {index} failed: {source}")]
    SweepPoint {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
