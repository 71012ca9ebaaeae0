use thiserror::Error;

/// Errors produced by mesh construction, discretization and the solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("degenerate cell {cell} (signed area {area:e})")]
    DegenerateCell { cell: usize, area: f64 },

    #[error("node index {node} out of range (mesh has {count} nodes)")]
    InvalidNode { node: usize, count: usize },

    #[error("node {node} is a boundary node; an interior node is required")]
    BoundaryNode { node: usize },

    #[error("mesh is not weakly acute: cell {cell} has an angle of {angle_deg:.3} degrees")]
    NotWeaklyAcute { cell: usize, angle_deg: f64 },

    #[error("coefficients are not uniformly elliptic: smallest eigenvalue {lambda:e}")]
    NotElliptic { lambda: f64 },

    #[error("A - (lambda/2) I is not positive definite for control pair ({alpha}, {beta}): smallest eigenvalue {min_eig:e}")]
    NotPositiveDefinite {
        alpha: usize,
        beta: usize,
        min_eig: f64,
    },

    #[error("axis rule radius {r} violates positivity; admissible interval is [{min}, 1)")]
    QuadratureRadius { r: f64, min: f64 },

    #[error("quadrature invariant violated: {0}")]
    Quadrature(String),

    #[error("policy matrix sign pattern violated at row {row}: {detail}")]
    SignPattern { row: usize, detail: String },

    #[error("linear system is singular or ill-conditioned: {0}")]
    Singular(String),

    #[error("no interior nodes")]
    NoInteriorNodes,

    #[error("{method} did not converge after {iterations} iterations (residual history {history:?})")]
    NonConvergence {
        method: &'static str,
        iterations: usize,
        history: Vec<f64>,
    },

    #[error("could not construct a discrete supersolution: {0}")]
    Supersolution(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unknown problem id `{0}`")]
    UnknownProblem(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::UnknownProblem(_) | Error::InvalidParameter(_) => 2,
            Error::NonConvergence { .. } => 3,
            Error::SignPattern { .. }
            | Error::Supersolution(_)
            | Error::Quadrature(_)
            | Error::NotWeaklyAcute { .. } => 4,
            _ => 1,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
