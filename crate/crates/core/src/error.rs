use std::time::Duration;

/// Progress made by an enumeration before it hit its budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Progress {
    pub depth: usize,
    pub visited: u64,
    pub requested: u64,
    pub elapsed: Duration,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("matrix entries must be finite")]
    NonFinite,
    #[error("matrix is not invertible or has negative determinant (det = {0})")]
    BadDeterminant(f64),
    #[error("singular directions are degenerate: norm is within tolerance of 1")]
    DegenerateDirections,
    #[error("alphabet must contain at least one matrix")]
    EmptyAlphabet,
    #[error("invalid probability vector: {0}")]
    BadProbs(String),
    #[error("word budget exceeded at depth {}: visited {} of {} words in {:?}", .0.depth, .0.visited, .0.requested, .0.elapsed)]
    BudgetExceeded(Progress),
    #[error("invalid almost-multiplicativity constant {0}; must lie in (0, 1]")]
    InvalidConstant(f64),
    #[error("bisection not bracketed: {0}")]
    NotBracketed(String),
    #[error("non-positive gap between inner and outer multicone ({0:.3e})")]
    NonPositiveGap(f64),
    #[error("multicone images are not compactly contained (clearance {0:.3e})")]
    NotCompactlyContained(f64),
    #[error("elliptic letter present")]
    EllipticLetter,
    #[error("norm growth not detected up to depth {0}")]
    NoNormGrowth(usize),
    #[error("system is not reducible: no common fixed point")]
    NotReducible,
    #[error("not applicable: {0}")]
    NotApplicable(String),
    #[error("no pivot found up to depth {0}")]
    NoPivot(usize),
    #[error("certification failed: {0}")]
    CertificationFailed(String),
    #[error(
        "elliptic element has infinite order (rotation angle {0} is not a rational multiple of pi)"
    )]
    InfiniteOrder(f64),
    #[error("too few scales for a dimension fit: {0}")]
    TooFewScales(String),
    #[error("orbit sampling failed to converge for {dropped} of the first {total} samples")]
    NonConvergence { dropped: usize, total: usize },
    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Usage(String),
}

pub type Result<T> = std::result::Result<T, Error>;
