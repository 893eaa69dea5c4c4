use crate::ensembles::EnsembleKind;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("{ensemble}: t = {t} lies outside the real domain of the ensemble")]
    Domain { ensemble: EnsembleKind, t: f64 },

    #[error("invalid interval [{a}, {b}]: {reason}")]
    InvalidInterval { a: f64, b: f64, reason: String },

    #[error("t = 0 is excluded: the local frequency is undefined there")]
    ZeroPoint,

    #[error("t = {t} is outside the certified range |t| <= {t_max}")]
    OutOfRange { t: f64, t_max: f64 },

    #[error("{ensemble} is not supported here: {reason}")]
    Unsupported {
        ensemble: EnsembleKind,
        reason: &'static str,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    /// True for errors caused by bad input, as opposed to numerical failures.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Numerical(_))
    }
}
