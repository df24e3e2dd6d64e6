use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("valuation of zero undefined")]
    ValuationOfZero,
    #[error("{0} is not a prime")]
    NotPrime(u64),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("place mismatch")]
    PlaceMismatch,
    #[error("matrix is singular")]
    Singular,
    #[error("r ≤ 2ε")]
    RadiusTooSmall,
    #[error("x not in general position: {0}")]
    GeneralPosition(String),
    #[error("trivial class")]
    TrivialClass,
    #[error("nothing to intersect")]
    NothingToIntersect,
    #[error("hypothesis not certified: {0}")]
    Hypothesis(String),
    #[error("not hyperbolic")]
    NotHyperbolic,
    #[error("expand further")]
    ExpandFurther,
    #[error("letter {0} is not in the declared factor")]
    BadLetter(String),
    #[error("invalid group table: {0}")]
    BadTable(String),
    #[error("backend mismatch")]
    BackendMismatch,
    #[error("parse error at {line}:{col}: {msg}")]
    Parse {
        line: usize,
        col: usize,
        msg: String,
    },
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
