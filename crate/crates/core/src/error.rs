use alloc::string::String;

use thiserror::Error;

/// Errors raised by the classification pipeline and its numerics.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum NpError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("insufficient class-{class} sample: {detail}")]
    InsufficientClassSample { class: u8, detail: String },

    #[error(
        "insufficient screening subsample: n1={n1}, m1={m1}, need at least {required} per class"
    )]
    InsufficientScreeningSample {
        n1: usize,
        m1: usize,
        required: usize,
    },

    #[error("no features survive screening (cutoff {cutoff})")]
    NoFeaturesSurvive { cutoff: f64 },

    #[error("feature {feature} has zero variance")]
    ZeroVariance { feature: usize },

    #[error("feature {feature} has nonpositive bandwidth {bandwidth}")]
    NonPositiveBandwidth { feature: usize, bandwidth: f64 },

    #[error("bound is vacuous: {0}")]
    VacuousBound(String),

    #[error("m3={m3} is below the feasibility bound {required} for the type I guarantee")]
    InfeasibleM3 { m3: usize, required: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid label {0}; labels must be 0 or 1")]
    InvalidLabel(u8),
}

pub type Result<T> = core::result::Result<T, NpError>;
