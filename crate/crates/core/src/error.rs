use thiserror::Error;

use crate::control_sequencer::Infeasibility;

/// Errors raised by the model and estimator layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("no two-photon probability reproduces g2(0) = {g2_zero} at single-photon probability {single}")]
    NoContaminationSolution { single: f64, g2_zero: f64 },

    #[error("channel {channel} out of range 1..={n_channels}")]
    ChannelOutOfRange { channel: usize, n_channels: usize },

    #[error("schedule incompatible with clock: {0}")]
    IncompatibleSchedule(String),

    #[error("infeasible schedule: {0}")]
    Infeasible(Infeasibility),

    #[error("peak windows overlap: period {period_ns} ns <= 2 x half-width {halfwidth_ns} ns")]
    WindowOverlap { period_ns: f64, halfwidth_ns: f64 },

    #[error("no side peak fits inside the histogram range")]
    NoSidePeaks,

    #[error("estimate undefined: {0}")]
    UndefinedEstimate(&'static str),

    #[error("fit needs at least two distinct orders with positive rate, got {0}")]
    InsufficientFitPoints(usize),

    #[error("histograms are not mergeable: {0}")]
    HistogramMismatch(&'static str),

    #[error("time tags not strictly increasing at index {index}")]
    UnsortedTags { index: usize },

    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_probability(field: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            field,
            reason: format!("{value} is not a probability in [0, 1]"),
        })
    }
}

pub(crate) fn check_positive(field: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            field,
            reason: format!("{value} must be positive and finite"),
        })
    }
}

pub(crate) fn check_non_negative(field: &'static str, value: f64) -> Result<()> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            field,
            reason: format!("{value} must be non-negative and finite"),
        })
    }
}
