use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("rotation rate must be nonzero")]
    ZeroRate,

    #[error("blend time rho = {rho} outside (0, {bound}) for the given rates")]
    RhoOutOfRange { rho: f64, bound: f64 },

    #[error("gain {name} must be positive, got {value}")]
    NonPositiveGain { name: &'static str, value: f64 },

    #[error("log-normal noise needs a positive true distance")]
    DegenerateMeasurement,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid config: {0}")]
    ConfigInvalid(String),

    #[error("state norm exceeded {limit:e} at t = {t}")]
    NumericalBlowup { t: f64, limit: f64 },

    #[error("window [{start}, {end}] outside recorded range [{first}, {last}]")]
    WindowOutOfRange {
        start: f64,
        end: f64,
        first: f64,
        last: f64,
    },

    #[error("need at least 3 usable points for a decay fit, got {0}")]
    InsufficientData(usize),
}

impl Error {
    /// Stable snake-case identifier for machine-readable reporting.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::ZeroRate => "zero_rate",
            Error::RhoOutOfRange { .. } => "rho_out_of_range",
            Error::NonPositiveGain { .. } => "non_positive_gain",
            Error::DegenerateMeasurement => "degenerate_measurement",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::ConfigInvalid(_) => "config_invalid",
            Error::NumericalBlowup { .. } => "numerical_blowup",
            Error::WindowOutOfRange { .. } => "window_out_of_range",
            Error::InsufficientData(_) => "insufficient_data",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_gain(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveGain { name, value })
    }
}
