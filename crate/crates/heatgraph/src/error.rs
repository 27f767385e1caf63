use thiserror::Error;

/// Crate-wide error type.
///
/// Variants fall into two families that callers (notably the CLI) treat
/// differently: malformed input (`InvalidGraph`, `InvalidMesh`,
/// `InvalidArgument`, parse failures) versus configurations that are
/// well-formed but cannot be solved (`Underdetermined`, `RankDeficient`,
/// `ZeroColumn`, `Disconnected`). Use [`Error::is_infeasible`] to
/// distinguish the second family.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{context}: expected length {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("eigensolver did not converge on a {order}x{order} matrix (off-diagonal residual {residual:.3e})")]
    EigenFailure { order: usize, residual: f64 },

    #[error("spectrum invariant violated: {0}")]
    SpectrumInvariant(String),

    /// The sampled eigenvector matrix has a column with no energy at any
    /// selected vertex, so the corresponding spectral coefficient is
    /// invisible to every observation. `column` is 1-based.
    #[error("selected vertices see none of spectral component {column} (all-zero sampled column)")]
    ZeroColumn { column: usize },

    #[error("underdetermined system: {rows} equations for {unknowns} unknowns")]
    Underdetermined { rows: usize, unknowns: usize },

    /// The observation operator does not have full column rank, so the
    /// least-squares solution is not unique. No minimum-norm answer is
    /// returned; the caller must change the configuration.
    #[error("rank-deficient operator: numerical rank {rank} of {unknowns} unknowns (sigma_min {sigma_min:.3e})")]
    RankDeficient {
        rank: usize,
        unknowns: usize,
        sigma_min: f64,
    },

    #[error("disconnected: {0}")]
    Disconnected(String),

    #[error("scenario: {0}")]
    Scenario(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for configurations that are structurally valid but cannot be
    /// solved: too few observations, a rank-deficient or degenerate
    /// operator, or a graph/mesh that falls apart. The CLI maps these to
    /// exit code 2 and validation errors to exit code 1.
    pub fn is_infeasible(&self) -> bool {
        matches!(
            self,
            Error::ZeroColumn { .. }
                | Error::Underdetermined { .. }
                | Error::RankDeficient { .. }
                | Error::Disconnected(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
