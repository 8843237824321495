//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid element id {0}")]
    InvalidElement(usize),

    #[error("invalid face id {0}")]
    InvalidFace(usize),

    #[error("empty mesh")]
    EmptyMesh,

    #[error("mesh is not conforming: {0}")]
    NotConforming(String),

    #[error("triangle {0} has non-positive signed area")]
    BadOrientation(usize),

    #[error("refinement closure did not settle after {0} rounds")]
    ClosureStalled(usize),

    #[error("unsupported polynomial degree {0} (supported: 1..=3)")]
    UnsupportedDegree(usize),

    #[error("stabilization must be positive, got {0}")]
    InvalidStabilization(f64),

    #[error("invalid control bounds: lower {lower} must be < upper {upper}")]
    InvalidBounds { lower: f64, upper: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(
        "trace solver did not converge: relative residual {residual:.3e} after {iterations} iterations"
    )]
    SolverDiverged { residual: f64, iterations: usize },

    #[error(
        "fixed-point iteration did not converge after {iterations} iterations (last residual {residual:.3e})"
    )]
    FixedPointDiverged {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("singular local element system on element {0}")]
    SingularLocalSystem(usize),

    #[error("trace dof budget {budget} does not exceed initial dof count {initial}")]
    BudgetTooSmall { budget: usize, initial: usize },

    #[error("afem stopped at iteration {iteration}: {source}")]
    AfemIteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("problem has no exact solution callbacks; error report unavailable")]
    MissingExactSolution,

    #[error(
        "manufactured data audit failed: |{name}| = {residual:.3e} at ({x:.6}, {y:.6}) exceeds {tolerance:.1e}"
    )]
    ManufacturedAudit {
        name: String,
        residual: f64,
        x: f64,
        y: f64,
        tolerance: f64,
    },

    #[error("mesh file parse error at line {line}: {message}")]
    MeshParse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
