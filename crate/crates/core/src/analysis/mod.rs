//! Estimators applied to detector time tags.
//!
//! Correlation histograms and windowed peak areas feed the purity and
//! two-photon interference estimators; n-fold coincidence rates feed the
//! geometric fit that yields the per-pulse detection probability and the
//! channel efficiency.

mod coincidence;
mod efficiency;
mod estimators;
mod fit;
mod histogram;
mod peaks;

pub use coincidence::{CoincidenceCounts, OrderRate};
pub use efficiency::{channel_efficiency, EfficiencyReport};
pub use estimators::{
    distinguishable_normalized_ratio, g2_zero, hom_corrected, hom_uncorrected,
};
pub use fit::{fit_exponential, ExponentialFit};
pub use histogram::{autocorrelate, correlate, CorrelationHistogram};
pub use peaks::{peak_areas, PeakAreas, PeakWindows};
