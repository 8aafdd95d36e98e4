//! Error types shared across the simulator.

use thiserror::Error;

/// Errors raised by the simulation engine and its models.
#[derive(Debug, Error)]
pub enum SimError {
    #[error("event scheduled at t={at} is in the past (clock={now})")]
    ScheduleInPast { at: f64, now: f64 },

    #[error("uniform range is empty: lo={lo} > hi={hi}")]
    BadUniformRange { lo: f64, hi: f64 },

    #[error("{count} nodes exceed grid capacity of {capacity} intersections")]
    GridCapacity { count: usize, capacity: usize },

    #[error("RTT sample must be positive, got {0}")]
    NonPositiveRtt(f64),
}

/// Errors raised while loading or validating scenario configuration.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read scenario file: {0}")]
    Io(#[from] std::io::Error),

    #[error("scenario file is not valid: {0}")]
    Parse(#[from] serde_json::Error),

    #[error("invalid value for `{field}`: {reason}")]
    Invalid { field: String, reason: String },

    #[error("unknown sweep axis `{0}`")]
    UnknownAxis(String),

    #[error("cannot parse `{value}` as a value for axis `{axis}`")]
    BadAxisValue { axis: String, value: String },
}

impl ConfigError {
    pub fn invalid(field: &str, reason: impl Into<String>) -> Self {
        ConfigError::Invalid {
            field: field.to_string(),
            reason: reason.into(),
        }
    }
}
