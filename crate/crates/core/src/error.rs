use thiserror::Error;

pub type Result<T, E = QwmError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum QwmError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },

    #[error("insufficient data: need at least {needed} distributions, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("manifold fit of dimension {dimension} failed: max residual {residual:e} exceeds {tolerance:e}")]
    FitFailure {
        dimension: usize,
        residual: f64,
        tolerance: f64,
    },

    #[error("grid too coarse: density integrates to {integral} (|1 - integral| > {tolerance:e})")]
    Resolution { integral: f64, tolerance: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl QwmError {
    pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Self {
        QwmError::Invalid {
            what,
            reason: reason.into(),
        }
    }

    /// True for errors that originate from user input rather than numerics.
    pub fn is_config_error(&self) -> bool {
        matches!(self, QwmError::Config(_) | QwmError::Parse(_))
    }
}
