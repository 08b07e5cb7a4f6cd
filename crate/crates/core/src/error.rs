use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("variable count mismatch: {left} vs {right}")]
    VarCountMismatch { left: usize, right: usize },

    #[error("variable index {index} out of range for {n_vars} variables")]
    VarIndexOutOfRange { index: usize, n_vars: usize },

    #[error("point has {got} coordinates, polynomial has {expected} variables")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("replacement polynomial must have degree <= 1, got degree {0}")]
    NonlinearReplacement(u32),

    #[error("player index {index} out of range for {n_players} players")]
    PlayerOutOfRange { index: usize, n_players: usize },

    #[error("malformed game: {0}")]
    MalformedGame(String),

    #[error("malformed problem: {0}")]
    MalformedProblem(String),

    #[error("level {level} is below the required degree {required}")]
    DegreeViolation { level: u32, required: u32 },

    #[error("certificate rejected: identity residual {residual:.3e} exceeds tolerance {tol:.1e}")]
    CertificateRejected { residual: f64, tol: f64 },

    #[error("certificate rejected: Gram matrix has eigenvalue {min_eigenvalue:.3e}")]
    IndefiniteGram { min_eigenvalue: f64 },

    #[error("solver did not reach optimality: {0:?}")]
    SolverFailure(crate::sdp::SolveStatus),

    #[error("projection infeasible at level {0}")]
    ProjectionInfeasible(u32),

    #[error("malformed extensive-form game: {0}")]
    MalformedTree(String),

    #[error("invalid strategy: {0}")]
    InvalidStrategy(String),

    #[error("sampling failed: {0}")]
    Sampling(String),

    #[error("SDPA parse error at line {line}: {msg}")]
    SdpaParse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
