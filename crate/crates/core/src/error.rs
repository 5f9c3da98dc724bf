use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("{a} is not a unit modulo {q}")]
    NotCoprime { a: i64, q: u64 },
    #[error("bad range [{x}, {y}] for modulus {q}")]
    BadRange { x: u64, y: u64, q: u64 },
    #[error("covering set for tau={tau}, q={q}, level={level} is not an inverse range: {detail}")]
    PropositionViolation { tau: String, q: u64, level: u64, detail: String },
    #[error("no lattice points on the sphere |x|^2 = {n} in dimension {d}")]
    EmptySphere { d: usize, n: u64 },
    #[error("quadrature did not converge: stderr {stderr:e} above target {target:e}")]
    QuadratureNotConverged { stderr: f64, target: f64 },
    #[error("grid {n}^{d} exceeds the size limit or is not a power of two")]
    GridTooLarge { n: usize, d: usize },
    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),
    #[error("budget exceeded: {0}")]
    BudgetExceeded(String),
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("unknown region '{0}'")]
    UnknownRegion(String),
    #[error("recursion exceeded depth {depth}")]
    RecursionBudget { depth: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for LabError {
    fn from(e: std::io::Error) -> Self {
        LabError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
