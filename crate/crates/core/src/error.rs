use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Caller supplied a value outside an operation's domain.
    #[error("invalid input: {0}")]
    Usage(String),

    /// The black-box RDP to group conversion cannot be applied.
    #[error("conversion inapplicable: {0}")]
    ConversionInapplicable(String),

    /// Calibration target lies outside what the search bracket can reach.
    #[error("calibration infeasible: {message} (achievable range [{best}, {worst}])")]
    Infeasible {
        message: String,
        best: f64,
        worst: f64,
    },

    #[error("numerical failure: {message} (last estimate {last_estimate})")]
    NumericalFailure { message: String, last_estimate: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>, last_estimate: f64) -> Self {
        Error::NumericalFailure {
            message: msg.into(),
            last_estimate,
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) | Error::ConversionInapplicable(_) => 2,
            Error::Infeasible { .. } => 3,
            Error::Io(_) | Error::Csv(_) => 4,
            Error::NumericalFailure { .. } => 5,
        }
    }
}
