use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("singular input: {0}")]
    Singular(String),

    #[error("model not valid here: {0}")]
    ModelInvalid(String),

    #[error("internal consistency error: {0}")]
    Consistency(String),

    #[error("spin-wave mode does not overlap the atom cloud (max weight {max_weight:e})")]
    EmptyMode { max_weight: f64 },

    #[error("{outside_fraction:.3} of the weight lies outside the density grid (limit 0.01)")]
    GridCoverage { outside_fraction: f64 },

    #[error("density grids differ in extent or resolution")]
    GridMismatch,

    #[error(
        "calibration target {target:e} s unreachable: tau({lo:e} m) = {tau_lo:e} s, tau({hi:e} m) = {tau_hi:e} s"
    )]
    CalibrationFailure {
        target: f64,
        lo: f64,
        hi: f64,
        tau_lo: f64,
        tau_hi: f64,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
