use thiserror::Error;

/// Errors raised by the framework itself.
///
/// Failures of a system under test are never reported through this type; they
/// are classified into [`crate::harness::SutStatus`] instead.
#[derive(Debug, Error)]
pub enum Error {
    #[error("design matrix is rank deficient (sigma_min = {sigma_min:e}, tolerance = {tolerance:e})")]
    RankDeficient { sigma_min: f64, tolerance: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite values in {0}")]
    NonFinite(String),

    #[error("shift transforms require the intercept form")]
    ShiftRequiresIntercept,

    #[error("index {index} out of range (valid: {valid})")]
    IndexOutOfRange { index: usize, valid: String },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid transform parameters: {0}")]
    InvalidTransform(String),

    #[error("infeasible generator spec: {0}")]
    InfeasibleSpec(String),

    #[error("{mr} is not applicable to the {form} form")]
    Inapplicable { mr: String, form: &'static str },

    #[error("{0} needs the source output to build its follow-up input")]
    MissingSourceOutput(String),

    #[error("unknown fault id `{0}`")]
    UnknownFault(String),

    #[error("unknown metamorphic relation `{0}`")]
    UnknownMr(String),

    #[error("ratio undefined: no survived pairs")]
    NoSurvivedPairs,

    #[error("harness i/o error: {0}")]
    HarnessIo(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
