use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("distribution has no atoms")]
    EmptyDistribution,
    #[error("probability must be positive and finite, got {0}")]
    NegativeProbability(f64),
    #[error("probabilities sum to {0}, expected 1")]
    ProbabilitySumOutOfTolerance(f64),
    #[error("distribution is degenerate (single atom)")]
    DegenerateDistribution,
    #[error("input is empty")]
    EmptyInput,
    #[error("value {0} lies outside [0, 1]")]
    OutOfUnitInterval(f64),
    #[error("atom {0} lies outside [0, 1]")]
    AtomOutOfUnitInterval(f64),
    #[error("mixture weights must be positive and sum to 1, got sum {0}")]
    WeightSumOutOfTolerance(f64),
    #[error("degrees of freedom must be at least 1")]
    InvalidDegreesOfFreedom,
    #[error("argument must be non-negative, got {0}")]
    NegativeArgument(f64),
    #[error("parameter must be non-negative, got {0}")]
    NegativeParameter(f64),
    #[error("deviation t must be non-negative, got {0}")]
    NegativeT(f64),
    #[error("standard deviation {0} outside (0, 12^-1/2]")]
    SigmaOutOfRange(f64),
    #[error("p-value must be positive for Fisher combination, got {0}")]
    NonPositivePValue(f64),
    #[error("alpha must lie in (0, 1], got {0}")]
    InvalidAlpha(f64),
    #[error("x1 must lie in (0, 1/4], got {0}")]
    X1OutOfRange(f64),
    #[error("alternative violates precondition: {0}")]
    AlternativeViolatesPrecondition(String),
    #[error("length mismatch: {0} values but {1} standard deviations")]
    LengthMismatch(usize, usize),
    #[error("series did not converge")]
    NoConvergence,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::EmptyDistribution => "EmptyDistribution",
            Error::NegativeProbability(_) => "NegativeProbability",
            Error::ProbabilitySumOutOfTolerance(_) => "ProbabilitySumOutOfTolerance",
            Error::DegenerateDistribution => "DegenerateDistribution",
            Error::EmptyInput => "EmptyInput",
            Error::OutOfUnitInterval(_) => "OutOfUnitInterval",
            Error::AtomOutOfUnitInterval(_) => "AtomOutOfUnitInterval",
            Error::WeightSumOutOfTolerance(_) => "WeightSumOutOfTolerance",
            Error::InvalidDegreesOfFreedom => "InvalidDegreesOfFreedom",
            Error::NegativeArgument(_) => "NegativeArgument",
            Error::NegativeParameter(_) => "NegativeParameter",
            Error::NegativeT(_) => "NegativeT",
            Error::SigmaOutOfRange(_) => "SigmaOutOfRange",
            Error::NonPositivePValue(_) => "NonPositivePValue",
            Error::InvalidAlpha(_) => "InvalidAlpha",
            Error::X1OutOfRange(_) => "X1OutOfRange",
            Error::AlternativeViolatesPrecondition(_) => "AlternativeViolatesPrecondition",
            Error::LengthMismatch(..) => "LengthMismatch",
            Error::NoConvergence => "NoConvergence",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::Parse(_) => "ParseError",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
