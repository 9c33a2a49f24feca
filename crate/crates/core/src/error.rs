use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("top-degree form: exterior derivative of a degree-{0} form on a {0}-manifold")]
    TopDegree(usize),

    #[error("degree overflow: degree {got} exceeds dimension {dim}")]
    DegreeOverflow { got: usize, dim: usize },

    #[error("metric is not positive definite at node {node} (coordinates {coords:?})")]
    NotPositiveDefinite { node: usize, coords: Vec<f64> },

    #[error("invalid diffeomorphism: {0}")]
    InvalidDiffeomorphism(String),

    #[error("inverse iteration did not converge at {point:?} after {iterations} iterations")]
    InverseNotConverged { point: Vec<f64>, iterations: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("orientation: {0}")]
    Orientation(String),

    #[error("invalid polynomial: {0}")]
    Polynomial(String),

    #[error("mapping torus: {0}")]
    MappingTorus(String),

    #[error("functional derivative step underflowed while restoring positivity")]
    StepUnderflow,

    #[error("ledger: {0}")]
    Ledger(String),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}
