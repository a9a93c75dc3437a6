use thiserror::Error;

/// Every failure the library can report.
///
/// Variant names are stable: the CLI prints them verbatim as the machine
/// readable error name.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("population spectrum has no atoms")]
    EmptySpectrum,
    #[error("spectrum value {0} is not strictly positive")]
    NonPositiveValue(f64),
    #[error("spectrum weight {0} is not strictly positive")]
    NonPositiveWeight(f64),
    #[error("unknown builtin spectrum `{0}`")]
    UnknownName(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid radius law: {0}")]
    InvalidLaw(String),
    #[error("sphere draw degenerated after {0} attempts")]
    DegenerateDraw(u32),
    #[error("spectrum weights could not be apportioned onto {0} eigenvalues")]
    WeightRoundingMismatch(usize),
    #[error("signal strength {0} is negative")]
    NegativeStrength(f64),
    #[error("f has a pole at w = 0")]
    PoleAtZero,
    #[error("f has a pole at w = -1/{0}")]
    PoleAtAtom(f64),
    #[error("critical point equation has no sign change on (0, 1/sigma_1)")]
    BracketFailure,
    #[error("edge condition violated: 1 - sigma_1 c = {0}")]
    ConditionViolated(f64),
    #[error("self-consistent equation did not converge: residual {residual:e} after {iterations} iterations")]
    NoConvergence { residual: f64, iterations: usize },
    #[error("solution left the upper half plane: Im m = {0:e}")]
    WrongBranch(f64),
    #[error("eigenvalue computation failed: {0}")]
    EigenFailure(String),
    #[error("eigenvalue gap lambda_2 - lambda_3 = {0:e} is degenerate")]
    DegenerateGap(f64),
    #[error("no calibration available: {0}")]
    MissingCalibration(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("i/o failure: {0}")]
    Io(String),
    #[error("malformed input: {0}")]
    Parse(String),
}

impl Error {
    /// The variant name, e.g. `"BracketFailure"`.
    pub fn name(&self) -> &'static str {
        match self {
            Error::EmptySpectrum => "EmptySpectrum",
            Error::NonPositiveValue(_) => "NonPositiveValue",
            Error::NonPositiveWeight(_) => "NonPositiveWeight",
            Error::UnknownName(_) => "UnknownName",
            Error::InvalidModel(_) => "InvalidModel",
            Error::InvalidLaw(_) => "InvalidLaw",
            Error::DegenerateDraw(_) => "DegenerateDraw",
            Error::WeightRoundingMismatch(_) => "WeightRoundingMismatch",
            Error::NegativeStrength(_) => "NegativeStrength",
            Error::PoleAtZero => "PoleAtZero",
            Error::PoleAtAtom(_) => "PoleAtAtom",
            Error::BracketFailure => "BracketFailure",
            Error::ConditionViolated(_) => "ConditionViolated",
            Error::NoConvergence { .. } => "NoConvergence",
            Error::WrongBranch(_) => "WrongBranch",
            Error::EigenFailure(_) => "EigenFailure",
            Error::DegenerateGap(_) => "DegenerateGap",
            Error::MissingCalibration(_) => "MissingCalibration",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::Io(_) => "Io",
            Error::Parse(_) => "Parse",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
