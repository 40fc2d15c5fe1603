use thiserror::Error;

/// Every failure the library can report. [`Error::code`] gives a stable
/// machine-readable name used in the CLI's JSON error records.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("member index {index} out of range for a family of {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("sequence {member} is tabulated only up to {bound}, asked for {requested}")]
    TableBoundExceeded { member: usize, requested: String, bound: u64 },
    #[error("member {0} is not a polynomial")]
    NonPolynomialMember(usize),
    #[error("member {0} has a nonzero constant term")]
    NonzeroConstantTerm(usize),
    #[error("empty family")]
    EmptyFamily,
    #[error("search exhausted: {0}")]
    SearchExhausted(String),
    #[error("coefficient matrix is rank deficient (rank {rank}, need {needed})")]
    RankDeficient { rank: usize, needed: usize },
    #[error("scan exhausted: {0}")]
    ScanExhausted(String),
    #[error("family is not asymptotically independent, witness {witness:?}")]
    DependentFamily { witness: Vec<String> },
    #[error("measure has no summable tail bound")]
    TailBoundUnavailable,
    #[error("truncation needs {required} levels, limit is {limit}")]
    TruncationInfeasible { required: String, limit: usize },
    #[error("resolution {g} is too coarse for rank {rank}")]
    ResolutionTooCoarse { rank: u32, g: u32 },
    #[error("resolution mismatch: {0} vs {1}")]
    ResolutionMismatch(u32, u32),
    #[error("interpolation weight {0} is not dyadic")]
    NonDyadicLambda(String),
    #[error("resolution {0} exceeds the supported maximum")]
    ResolutionOverflow(u32),
    #[error("dyadic rank {rank} is finer than resolution {g}")]
    RankTooFine { rank: u32, g: u32 },
    #[error("reference map does not move rank-{0} intervals rigidly")]
    NotRankCyclic(u32),
    #[error("expected {expected} primes, got {got}")]
    WrongPrimeCount { expected: usize, got: usize },
    #[error("prime {0} appears more than once")]
    RepeatedPrimes(String),
    #[error("{0} is not prime")]
    NotPrime(String),
    #[error("empty table")]
    EmptyTable,
    #[error("certified check failed: {0}")]
    Violation(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::Parse(_) => "parse-error",
            Error::Validation(_) => "validation-error",
            Error::IndexOutOfRange { .. } => "index-out-of-range",
            Error::TableBoundExceeded { .. } => "table-bound-exceeded",
            Error::NonPolynomialMember(_) => "non-polynomial-member",
            Error::NonzeroConstantTerm(_) => "nonzero-constant-term",
            Error::EmptyFamily => "empty-family",
            Error::SearchExhausted(_) => "search-exhausted",
            Error::RankDeficient { .. } => "rank-deficient",
            Error::ScanExhausted(_) => "scan-exhausted",
            Error::DependentFamily { .. } => "precondition-dependent-family",
            Error::TailBoundUnavailable => "tail-bound-unavailable",
            Error::TruncationInfeasible { .. } => "truncation-infeasible",
            Error::ResolutionTooCoarse { .. } => "resolution-too-coarse",
            Error::ResolutionMismatch(..) => "resolution-mismatch",
            Error::NonDyadicLambda(_) => "non-dyadic-lambda",
            Error::ResolutionOverflow(_) => "resolution-overflow",
            Error::RankTooFine { .. } => "rank-too-fine",
            Error::NotRankCyclic(_) => "not-rank-cyclic",
            Error::WrongPrimeCount { .. } => "wrong-prime-count",
            Error::RepeatedPrimes(_) => "repeated-primes",
            Error::NotPrime(_) => "not-prime",
            Error::EmptyTable => "empty-table",
            Error::Violation(_) => "certified-violation",
            Error::Io(_) => "io-error",
            Error::Json(_) => "parse-error",
        }
    }

    /// Process exit status used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Violation(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
