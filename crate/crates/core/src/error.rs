//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on user-supplied parameters failed.
    #[error("validation: {0}")]
    Validation(String),

    /// Mesh construction or import produced an inconsistent complex.
    #[error("mesh invalid: {0}")]
    MeshInvalid(String),

    /// A cell volume fell below the degeneracy tolerance.
    #[error("degenerate cell {cell}: volume {volume:.3e}")]
    DegenerateCell { cell: usize, volume: f64 },

    /// Requested resolution cannot represent the feature scale.
    #[error("resolution: {0}")]
    Resolution(String),

    /// Iterative eigensolver failed to converge.
    #[error("eigensolver did not converge after {iterations} sweeps (residual {residual:.3e})")]
    EigenSolver { iterations: usize, residual: f64 },

    /// Iterative linear solver failed to converge.
    #[error("linear solver stalled after {iterations} iterations (residual {residual:.3e})")]
    LinearSolver { iterations: usize, residual: f64 },

    /// No admissible projection plane found for the sweep map.
    #[error("sweep map: {attempts} consecutive plane draws failed the rank checks")]
    RankDeficient { attempts: usize },

    /// A disk family violates the admissibility constraints.
    #[error("family not admissible: {0}")]
    NotInGamma(String),

    /// Newton refinement ran out of iterations.
    #[error("refinement did not converge: best residual {residual:.3e} after {iterations} steps")]
    NonConvergence { iterations: usize, residual: f64 },

    /// Two objects built against different meshes were combined.
    #[error("mesh mismatch: {0}")]
    MeshMismatch(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    /// A persisted artifact failed to parse.
    #[error("parse {path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
}

impl Error {
    pub fn parse(path: &str, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.to_string(),
            line,
            message: message.into(),
        }
    }
}
