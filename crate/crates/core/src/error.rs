use thiserror::Error;

/// Every failure the library can report.
///
/// The variant name doubles as the diagnostic tag printed by the CLI.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("empty domain: {0}")]
    EmptyDomain(String),
    #[error("margin error: {0}")]
    Margin(String),
    #[error("modulus error: {0}")]
    Modulus(String),
    #[error("coefficient error: {0}")]
    Coefficient(String),
    #[error("numerics error: {0}")]
    Numerics(String),
    #[error("state error: {0}")]
    State(String),
    #[error("rank error: {0}")]
    Rank(String),
    #[error("resolution error: {0}")]
    Resolution(String),
    #[error("inapplicable: {0}")]
    Inapplicable(String),
    #[error("gap error: {0}")]
    Gap(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short stable name of the variant.
    pub fn name(&self) -> &'static str {
        match self {
            Error::Domain(_) => "DomainError",
            Error::EmptyDomain(_) => "EmptyDomain",
            Error::Margin(_) => "MarginError",
            Error::Modulus(_) => "ModulusError",
            Error::Coefficient(_) => "CoefficientError",
            Error::Numerics(_) => "NumericsError",
            Error::State(_) => "StateError",
            Error::Rank(_) => "RankError",
            Error::Resolution(_) => "ResolutionError",
            Error::Inapplicable(_) => "InapplicableError",
            Error::Gap(_) => "GapError",
            Error::Config(_) => "ConfigError",
            Error::Io(_) => "IoError",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
