use thiserror::Error;

/// Every failure the library can report. Variant names double as the
/// machine-readable error identifiers written by the scenario runner.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("invalid map: {0}")]
    InvalidMap(String),
    #[error("root finding failed: {0}")]
    RootFindingFailure(String),
    #[error("univalence failure at pullback step {step}: {reason}")]
    UnivalenceFailure { step: usize, reason: String },
    #[error("newton tracking diverged: {0}")]
    NewtonDivergence(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("word enumeration of {words} words exceeds cap {cap}")]
    EnumerationOverflow { words: u128, cap: usize },
    #[error("pressure root not bracketed: {0}")]
    BracketFailure(String),
    #[error("pressure not monotone: {0}")]
    NonMonotonePressure(String),
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("insufficient mass: sum of lambda^t = {sum} <= 1")]
    InsufficientMass { sum: f64 },
    #[error("no qualifying branch: {0}")]
    NoQualifyingBranch(String),
    #[error("search exhausted: {0}")]
    SearchExhausted(String),
    #[error("invalid iterated function system: {0}")]
    InvalidIfs(String),
    #[error("config parse error: {0}")]
    ConfigParseError(String),
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub fn name(&self) -> &'static str {
        match self {
            Error::DomainError(_) => "DomainError",
            Error::InvalidMap(_) => "InvalidMap",
            Error::RootFindingFailure(_) => "RootFindingFailure",
            Error::UnivalenceFailure { .. } => "UnivalenceFailure",
            Error::NewtonDivergence(_) => "NewtonDivergence",
            Error::InsufficientData(_) => "InsufficientData",
            Error::EnumerationOverflow { .. } => "EnumerationOverflow",
            Error::BracketFailure(_) => "BracketFailure",
            Error::NonMonotonePressure(_) => "NonMonotonePressure",
            Error::DegenerateFit(_) => "DegenerateFit",
            Error::InsufficientMass { .. } => "InsufficientMass",
            Error::NoQualifyingBranch(_) => "NoQualifyingBranch",
            Error::SearchExhausted(_) => "SearchExhausted",
            Error::InvalidIfs(_) => "InvalidIfs",
            Error::ConfigParseError(_) => "ConfigParseError",
            Error::Io(_) => "Io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
