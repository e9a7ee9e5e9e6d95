//! Pockels-cell driver schedule and channel-count feasibility.
//!
//! The high-voltage driver has two switches, each commanded by an on and an
//! off TTL edge. The cell holds high voltage while both keys are on, so the
//! switching window of a firing is the overlap of the two key intervals.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::clock_source::ClockConfig;
use crate::error::{check_non_negative, check_positive, Error, Result};
use crate::loop_demux::DemuxConfig;

const TIME_EPS_NS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriverConstraints {
    pub min_switch_interval_ns: f64,
    pub pulse_length_ns: f64,
    pub max_continuous_rate_hz: f64,
}

impl Default for DriverConstraints {
    fn default() -> Self {
        Self {
            min_switch_interval_ns: 70.0,
            pulse_length_ns: 12.0,
            max_continuous_rate_hz: 13e6,
        }
    }
}

impl DriverConstraints {
    pub fn validate(&self) -> Result<()> {
        check_positive("min_switch_interval_ns", self.min_switch_interval_ns)?;
        check_positive("pulse_length_ns", self.pulse_length_ns)?;
        check_positive("max_continuous_rate_hz", self.max_continuous_rate_hz)?;
        if self.min_switch_interval_ns < self.pulse_length_ns {
            return Err(Error::InvalidParameter {
                field: "min_switch_interval_ns",
                reason: "shorter than the voltage pulse".into(),
            });
        }
        if self.max_continuous_rate_hz * self.min_switch_interval_ns * 1e-9 > 1.0 + 1e-9 {
            return Err(Error::InvalidParameter {
                field: "max_continuous_rate_hz",
                reason: "exceeds 1 / min_switch_interval_ns".into(),
            });
        }
        Ok(())
    }
}

/// Placement of the firings relative to the clock.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleTiming {
    /// Cycle of the first firing; `None` fires once the loop is full
    /// (cycle `switch_period_cycles - 1`).
    pub first_firing_cycle: Option<u64>,
    /// Offset of the window centre from the co-transit instant.
    pub phase_ns: f64,
    /// Lead of the first key's on edge and lag of the second key's off edge.
    pub ttl_lead_ns: f64,
    pub rise_ns: f64,
    pub fall_ns: f64,
}

impl Default for ScheduleTiming {
    fn default() -> Self {
        Self {
            first_firing_cycle: None,
            phase_ns: 0.0,
            ttl_lead_ns: 2.0,
            rise_ns: 0.0,
            fall_ns: 0.0,
        }
    }
}

impl ScheduleTiming {
    pub fn validate(&self) -> Result<()> {
        if !self.phase_ns.is_finite() {
            return Err(Error::InvalidParameter {
                field: "phase_ns",
                reason: "must be finite".into(),
            });
        }
        check_non_negative("ttl_lead_ns", self.ttl_lead_ns)?;
        check_non_negative("rise_ns", self.rise_ns)?;
        check_non_negative("fall_ns", self.fall_ns)
    }
}

/// The four TTL edges of one firing, absolute times in ns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Firing {
    pub cycle_index: u64,
    pub key1_on_ns: f64,
    pub key1_off_ns: f64,
    pub key2_on_ns: f64,
    pub key2_off_ns: f64,
}

impl Firing {
    /// Interval during which both keys are on.
    pub fn window(&self) -> (f64, f64) {
        (
            self.key1_on_ns.max(self.key2_on_ns),
            self.key1_off_ns.min(self.key2_off_ns),
        )
    }

    pub fn window_length_ns(&self) -> f64 {
        let (start, end) = self.window();
        end - start
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TtlSchedule {
    pub firings: Vec<Firing>,
    /// Trapezoidal voltage fronts around every window.
    pub rise_ns: f64,
    pub fall_ns: f64,
}

impl TtlSchedule {
    pub fn firing_cycle_indices(&self) -> impl Iterator<Item = u64> + '_ {
        self.firings.iter().map(|f| f.cycle_index)
    }

    /// Window including the rise and fall fronts.
    pub fn extent(&self, firing: &Firing) -> (f64, f64) {
        let (start, end) = firing.window();
        (start - self.rise_ns, end + self.fall_ns)
    }
}

/// The constraint that makes a requested schedule impossible.
#[derive(Debug, Clone, PartialEq)]
pub enum Infeasibility {
    MinSwitchInterval {
        firing_interval_ns: f64,
        min_switch_interval_ns: f64,
    },
    /// Window plus fronts reaches a neighbouring pulse instant.
    FrontIsolation {
        extent_ns: (f64, f64),
        pulse_period_ns: f64,
    },
    /// The phase offset moves the window off its own pulse instant.
    PhaseOutsideWindow { phase_ns: f64, half_window_ns: f64 },
}

impl fmt::Display for Infeasibility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Infeasibility::MinSwitchInterval {
                firing_interval_ns,
                min_switch_interval_ns,
            } => write!(
                f,
                "min_switch_interval: firings {firing_interval_ns:.3} ns apart < {min_switch_interval_ns} ns"
            ),
            Infeasibility::FrontIsolation {
                extent_ns,
                pulse_period_ns,
            } => write!(
                f,
                "front_isolation: window [{:.3}, {:.3}] ns around the transit reaches a neighbour at +/-{pulse_period_ns:.3} ns",
                extent_ns.0, extent_ns.1
            ),
            Infeasibility::PhaseOutsideWindow {
                phase_ns,
                half_window_ns,
            } => write!(
                f,
                "phase: offset {phase_ns} ns exceeds the half window {half_window_ns} ns"
            ),
        }
    }
}

/// Builds `n_firings` firings every `switch_period_cycles` clock cycles, each
/// window centred on the co-transit instant plus `timing.phase_ns`.
pub fn build_schedule(
    clock: &ClockConfig,
    constraints: &DriverConstraints,
    switch_period_cycles: u32,
    n_firings: usize,
    timing: &ScheduleTiming,
) -> Result<TtlSchedule> {
    clock.validate()?;
    constraints.validate()?;
    timing.validate()?;
    if switch_period_cycles == 0 {
        return Err(Error::InvalidParameter {
            field: "switch_period_cycles",
            reason: "must be at least 1".into(),
        });
    }
    let period = clock.pulse_period_ns();
    let interval = f64::from(switch_period_cycles) * period;
    if interval + TIME_EPS_NS < constraints.min_switch_interval_ns {
        return Err(Error::Infeasible(Infeasibility::MinSwitchInterval {
            firing_interval_ns: interval,
            min_switch_interval_ns: constraints.min_switch_interval_ns,
        }));
    }
    let half = constraints.pulse_length_ns / 2.0;
    if timing.phase_ns.abs() > half {
        return Err(Error::Infeasible(Infeasibility::PhaseOutsideWindow {
            phase_ns: timing.phase_ns,
            half_window_ns: half,
        }));
    }
    let extent = (
        timing.phase_ns - half - timing.rise_ns,
        timing.phase_ns + half + timing.fall_ns,
    );
    if extent.1 >= period || extent.0 <= -period {
        return Err(Error::Infeasible(Infeasibility::FrontIsolation {
            extent_ns: extent,
            pulse_period_ns: period,
        }));
    }

    let first = timing
        .first_firing_cycle
        .unwrap_or(u64::from(switch_period_cycles) - 1);
    let firings = (0..n_firings as u64)
        .map(|k| {
            let cycle_index = first + k * u64::from(switch_period_cycles);
            let centre = clock.instant_ns(cycle_index) + timing.phase_ns;
            Firing {
                cycle_index,
                key1_on_ns: centre - half - timing.ttl_lead_ns,
                key1_off_ns: centre + half,
                key2_on_ns: centre - half,
                key2_off_ns: centre + half + timing.ttl_lead_ns,
            }
        })
        .collect();
    Ok(TtlSchedule {
        firings,
        rise_ns: timing.rise_ns,
        fall_ns: timing.fall_ns,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum ViolationKind {
    KeyOrder { key: u8 },
    WindowLength { actual_ns: f64, expected_ns: f64 },
    MinSwitchInterval { separation_ns: f64, required_ns: f64 },
    /// The window (with fronts) covers the instant `offset` pulses away.
    FrontIsolation { neighbor_offset: i64 },
    /// The window does not contain the transit instant of its firing cycle.
    MissesTransit,
    CycleOrder,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub firing_index: usize,
    pub kind: ViolationKind,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn validate_schedule(
    schedule: &TtlSchedule,
    clock: &ClockConfig,
    constraints: &DriverConstraints,
) -> ValidationReport {
    let period = clock.pulse_period_ns();
    let mut violations = Vec::new();
    let mut push = |firing_index, kind| violations.push(Violation { firing_index, kind });

    for (index, firing) in schedule.firings.iter().enumerate() {
        if firing.key1_on_ns >= firing.key1_off_ns {
            push(index, ViolationKind::KeyOrder { key: 1 });
        }
        if firing.key2_on_ns >= firing.key2_off_ns {
            push(index, ViolationKind::KeyOrder { key: 2 });
        }
        let length = firing.window_length_ns();
        if (length - constraints.pulse_length_ns).abs() > 1e-6 {
            push(
                index,
                ViolationKind::WindowLength {
                    actual_ns: length,
                    expected_ns: constraints.pulse_length_ns,
                },
            );
        }

        let (lo, hi) = schedule.extent(firing);
        let transit = clock.instant_ns(firing.cycle_index);
        let (start, end) = firing.window();
        if !(start <= transit && transit <= end) {
            push(index, ViolationKind::MissesTransit);
        }
        // every other pulse instant the extent reaches
        let first = ((lo - transit) / period).ceil() as i64;
        let last = ((hi - transit) / period).floor() as i64;
        for offset in first..=last {
            if offset != 0 {
                push(index, ViolationKind::FrontIsolation { neighbor_offset: offset });
            }
        }

        if index > 0 {
            let previous = &schedule.firings[index - 1];
            if firing.cycle_index <= previous.cycle_index {
                push(index, ViolationKind::CycleOrder);
            }
            let separation = start - previous.window().0;
            if separation + TIME_EPS_NS < constraints.min_switch_interval_ns {
                push(
                    index,
                    ViolationKind::MinSwitchInterval {
                        separation_ns: separation,
                        required_ns: constraints.min_switch_interval_ns,
                    },
                );
            }
        }
    }
    ValidationReport { violations }
}

/// Minimum channel count of a loop demultiplexer, floor(r / r_s).
pub fn min_channels(rep_rate_hz: f64, switch_rate_hz: f64) -> Result<u64> {
    check_positive("rep_rate_hz", rep_rate_hz)?;
    check_positive("switch_rate_hz", switch_rate_hz)?;
    let ratio = rep_rate_hz / switch_rate_hz;
    // absorb round-off just below an exact integer ratio
    Ok((ratio * (1.0 + 1e-12)).floor() as u64)
}

/// Fraction kept as an unreduced ratio so reports read like `4/6`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ratio {
    pub num: u64,
    pub den: u64,
}

impl Ratio {
    pub fn value(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSummary {
    pub doubled_rate: bool,
    pub rep_rate_hz: f64,
    pub pulse_period_ns: f64,
    pub n_channels: u64,
    pub switch_period_cycles: u64,
    pub firing_interval_ns: f64,
    pub duty: Ratio,
    pub lost: Ratio,
    pub min_channels: u64,
    pub meets_min_switch_interval: bool,
    pub needs_second_splitter: bool,
}

/// Channel count and photon budget of the baseline loop or of the variant
/// running at twice the repetition rate. In the doubled variant each pulse
/// travels half a round trip per cycle, so two counter-propagating beam sets
/// leave the loop through a second splitter.
pub fn explore_variant(
    config: &DemuxConfig,
    clock: &ClockConfig,
    constraints: &DriverConstraints,
    doubled_rate: bool,
) -> Result<VariantSummary> {
    config.validate()?;
    clock.validate()?;
    let factor = if doubled_rate { 2 } else { 1 };
    let rep_rate_hz = clock.rep_rate_hz * factor as f64;
    let pulse_period_ns = 1e9 / rep_rate_hz;
    let n_channels = config.n_slots as u64 * factor;
    let switch_period_cycles = u64::from(config.switch_period_cycles) * factor;
    let firing_interval_ns = switch_period_cycles as f64 * pulse_period_ns;
    Ok(VariantSummary {
        doubled_rate,
        rep_rate_hz,
        pulse_period_ns,
        n_channels,
        switch_period_cycles,
        firing_interval_ns,
        duty: Ratio {
            num: n_channels,
            den: switch_period_cycles,
        },
        lost: Ratio {
            num: switch_period_cycles - n_channels,
            den: switch_period_cycles,
        },
        min_channels: min_channels(rep_rate_hz, constraints.max_continuous_rate_hz)?,
        meets_min_switch_interval: firing_interval_ns + TIME_EPS_NS
            >= constraints.min_switch_interval_ns,
        needs_second_splitter: doubled_rate,
    })
}
