//! Crate-wide error type. Numerical rejections (singular metrics, guard
//! violations, rejected trajectories) are ordinary values of this enum, not
//! panics, so callers can degrade gracefully in batch runs.

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("singular metric: |det g| = {det:.3e} is below the floor {floor:.3e}")]
    SingularMetric { det: f64, floor: f64 },

    #[error("domain guard violated{}", fmt_time(.time))]
    GuardViolation { time: Option<f64> },

    #[error("not enough usable sample points: needed {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("step count {requested} exceeds the limit {limit}")]
    StepLimitExceeded { requested: u64, limit: u64 },

    #[error("trajectory rejected: relative energy drift {drift:.3e} exceeds {limit:.3e}")]
    RejectedTrajectory { drift: f64, limit: f64 },

    #[error("relation refers to unknown catalog field `{name}`")]
    RelationFieldMissing { name: String },

    #[error("degenerate homogeneity degrees: |nu + mu| = {sum:.3e} is below 1e-12")]
    DegenerateDegrees { sum: f64 },

    #[error("invalid parameter: {message}")]
    InvalidParameter { message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidParameter {
            message: message.into(),
        }
    }
}

fn fmt_time(time: &Option<f64>) -> String {
    match time {
        Some(t) => format!(" at t = {t:.6}"),
        None => String::new(),
    }
}
