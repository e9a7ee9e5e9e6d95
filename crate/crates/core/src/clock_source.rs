//! Pump-laser clock and quantum-dot emission stream.
//!
//! The source emits at most two photons per pump pulse. The single-photon
//! probability is the configured brightness and the two-photon probability is
//! solved so that the stream's second-order correlation at zero delay equals
//! the configured g2(0):
//!
//! ```text
//! g2(0) = 2 p2 / (p1 + 2 p2)^2
//! ```
//!
//! Indistinguishability is carried analytically: every photon gets a mode
//! label and the squared overlap of two photons is `V * decay^|pulse distance|`.

use std::ops::Range;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_non_negative, check_positive, check_probability, Error, Result};
use crate::rng::{Domain, KeyedRng};

/// Pump-laser clock. The pulse period is derived from the repetition rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClockConfig {
    pub rep_rate_hz: f64,
}

impl ClockConfig {
    pub fn new(rep_rate_hz: f64) -> Result<Self> {
        let clock = Self { rep_rate_hz };
        clock.validate()?;
        Ok(clock)
    }

    /// Clock whose period is exactly `period_ns`.
    pub fn from_period_ns(period_ns: f64) -> Result<Self> {
        check_positive("pulse_period_ns", period_ns)?;
        Self::new(1e9 / period_ns)
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("rep_rate_hz", self.rep_rate_hz)
    }

    pub fn pulse_period_ns(&self) -> f64 {
        1e9 / self.rep_rate_hz
    }

    /// Time of the clock instant with the given index.
    pub fn instant_ns(&self, index: u64) -> f64 {
        index as f64 * self.pulse_period_ns()
    }
}

/// Quantum-dot emission parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceModel {
    /// Probability per pulse of a single-photon emission.
    pub brightness: f64,
    pub g2_zero: f64,
    /// Squared wave-packet overlap of two photons from neighbouring pulses.
    pub indistinguishability: f64,
    /// Per-cycle multiplicative decay of the overlap.
    pub indistinguishability_decay: f64,
    /// Count rate the brightness was derived from, if any.
    pub count_rate_hz: Option<f64>,
}

impl Default for SourceModel {
    fn default() -> Self {
        Self {
            brightness: 0.0605,
            g2_zero: 0.024,
            indistinguishability: 0.98,
            indistinguishability_decay: 1.0,
            count_rate_hz: None,
        }
    }
}

impl SourceModel {
    /// Source whose brightness is derived from a detected count rate.
    pub fn from_count_rate(
        count_rate_hz: f64,
        clock: &ClockConfig,
        g2_zero: f64,
        indistinguishability: f64,
    ) -> Result<Self> {
        let model = Self {
            brightness: brightness_from_rate(count_rate_hz, clock.rep_rate_hz)?,
            g2_zero,
            indistinguishability,
            indistinguishability_decay: 1.0,
            count_rate_hz: Some(count_rate_hz),
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        check_probability("brightness", self.brightness)?;
        check_probability("indistinguishability", self.indistinguishability)?;
        check_probability("indistinguishability_decay", self.indistinguishability_decay)?;
        if !(0.0..1.0).contains(&self.g2_zero) {
            return Err(Error::InvalidParameter {
                field: "g2_zero",
                reason: format!("{} must lie in [0, 1)", self.g2_zero),
            });
        }
        if let Some(rate) = self.count_rate_hz {
            check_non_negative("count_rate_hz", rate)?;
        }
        Ok(())
    }

    /// Squared overlap between two photon modes.
    pub fn overlap(&self, a: ModeId, b: ModeId) -> f64 {
        let distance = a.0.abs_diff(b.0);
        if self.indistinguishability_decay == 1.0 || distance == 0 {
            return self.indistinguishability;
        }
        let exponent = i32::try_from(distance).unwrap_or(i32::MAX);
        self.indistinguishability * self.indistinguishability_decay.powi(exponent)
    }

    pub fn emission_probabilities(&self) -> Result<EmissionProbabilities> {
        self.validate()?;
        EmissionProbabilities::solve(self.brightness, self.g2_zero)
    }
}

/// Per-pulse photon-number distribution (zero, one or two photons).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmissionProbabilities {
    pub single: f64,
    pub double: f64,
}

impl EmissionProbabilities {
    const TOLERANCE: f64 = 1e-12;

    /// Finds the smallest two-photon probability reproducing `g2_zero` for a
    /// single-photon probability `single`, by bisection on `[0, single / 2]`
    /// where the correlation is monotone.
    pub fn solve(single: f64, g2_zero: f64) -> Result<Self> {
        check_probability("brightness", single)?;
        if g2_zero == 0.0 || single == 0.0 {
            return Ok(Self { single, double: 0.0 });
        }
        let residual = |double: f64| {
            let mean = single + 2.0 * double;
            2.0 * double / (mean * mean) - g2_zero
        };
        let mut lo = 0.0;
        let mut hi = single / 2.0;
        if residual(hi) < 0.0 {
            return Err(Error::NoContaminationSolution { single, g2_zero });
        }
        while hi - lo > Self::TOLERANCE * single.max(f64::MIN_POSITIVE) {
            let mid = 0.5 * (lo + hi);
            if residual(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let double = 0.5 * (lo + hi);
        if single + double > 1.0 {
            return Err(Error::NoContaminationSolution { single, g2_zero });
        }
        Ok(Self { single, double })
    }

    pub fn g2_zero(&self) -> f64 {
        let mean = self.single + 2.0 * self.double;
        if mean == 0.0 {
            0.0
        } else {
            2.0 * self.double / (mean * mean)
        }
    }
}

/// Internal-mode label of a photon; overlaps are computed from label distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ModeId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Polarization {
    H,
    V,
}

/// One emitted photon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhotonEvent {
    pub pulse_index: u64,
    /// 0 for the first photon of a pulse, 1 for the second.
    pub ordinal: u8,
    pub emission_time_ns: f64,
    pub mode_id: ModeId,
    pub polarization: Polarization,
    survival_prob: f64,
}

impl PhotonEvent {
    pub fn new(pulse_index: u64, ordinal: u8, clock: &ClockConfig) -> Self {
        Self {
            pulse_index,
            ordinal,
            emission_time_ns: clock.instant_ns(pulse_index),
            mode_id: ModeId(pulse_index),
            polarization: Polarization::H,
            survival_prob: 1.0,
        }
    }

    /// Rebuilds a photon read back from an event record.
    pub fn restore(
        pulse_index: u64,
        ordinal: u8,
        clock: &ClockConfig,
        mode_id: ModeId,
        polarization: Polarization,
        survival_prob: f64,
    ) -> Result<Self> {
        check_probability("survival_prob", survival_prob)?;
        Ok(Self {
            mode_id,
            polarization,
            survival_prob,
            ..Self::new(pulse_index, ordinal, clock)
        })
    }

    pub fn survival_prob(&self) -> f64 {
        self.survival_prob
    }

    /// Multiplies the survival probability by a transmission factor in [0, 1].
    pub fn attenuate(&mut self, transmission: f64) {
        debug_assert!((0.0..=1.0).contains(&transmission));
        self.survival_prob *= transmission.clamp(0.0, 1.0);
    }

    /// Globally unique photon key, used to address per-photon random draws.
    pub fn key(&self) -> u64 {
        self.pulse_index * 2 + u64::from(self.ordinal)
    }
}

/// B = count rate / repetition rate.
pub fn brightness_from_rate(count_rate_hz: f64, rep_rate_hz: f64) -> Result<f64> {
    check_non_negative("count_rate_hz", count_rate_hz)?;
    check_positive("rep_rate_hz", rep_rate_hz)?;
    if count_rate_hz > rep_rate_hz {
        return Err(Error::InvalidParameter {
            field: "count_rate_hz",
            reason: format!("{count_rate_hz} Hz exceeds the repetition rate {rep_rate_hz} Hz"),
        });
    }
    Ok(count_rate_hz / rep_rate_hz)
}

/// Emits the photon stream for pulses `0..n_pulses`.
pub fn generate_stream(
    source: &SourceModel,
    clock: &ClockConfig,
    n_pulses: u64,
    seed: u64,
) -> Result<Vec<PhotonEvent>> {
    if n_pulses == 0 {
        return Err(Error::InvalidParameter {
            field: "n_pulses",
            reason: "must be at least 1".into(),
        });
    }
    generate_range(source, clock, 0..n_pulses, seed)
}

/// Emits the photons of a sub-range of pulses. Concatenating adjacent ranges
/// yields exactly the stream of their union.
pub fn generate_range(
    source: &SourceModel,
    clock: &ClockConfig,
    pulses: Range<u64>,
    seed: u64,
) -> Result<Vec<PhotonEvent>> {
    clock.validate()?;
    let probabilities = source.emission_probabilities()?;
    let mut out = Vec::new();
    if pulses.is_empty() || probabilities.single + probabilities.double == 0.0 {
        return Ok(out);
    }
    // one f64 (two words) per pulse
    let mut keyed = KeyedRng::new(seed, Domain::Source, 2);
    let rng = keyed.at(pulses.start);
    let one_or_more = probabilities.single + probabilities.double;
    for pulse in pulses {
        let u: f64 = rng.random();
        if u < probabilities.single {
            out.push(PhotonEvent::new(pulse, 0, clock));
        } else if u < one_or_more {
            out.push(PhotonEvent::new(pulse, 0, clock));
            out.push(PhotonEvent::new(pulse, 1, clock));
        }
    }
    Ok(out)
}
