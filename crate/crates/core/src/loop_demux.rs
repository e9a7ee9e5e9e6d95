//! Discrete-event core of the loop demultiplexer.
//!
//! Every clock cycle the photons already stored in the loop shift one
//! transverse slot outward, the incoming pulse takes slot 0, and every photon
//! in the loop pays one pass of transmission loss. On a firing cycle the
//! Pockels cell rotates each photon with its slot's efficiency and the
//! rotated photons leave together, slot `k` feeding channel `k + 1`. Photons
//! whose rotation fails stay in the loop. On other cycles a photon can leak
//! out through residual rotation; such outputs are flagged parasitic. A photon
//! pushed past the last slot is clipped by the aperture.

use std::ops::Range;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::clock_source::{ClockConfig, PhotonEvent, Polarization};
use crate::control_sequencer::TtlSchedule;
use crate::error::{check_positive, check_probability, Error, Result};
use crate::rng::{Domain, KeyedRng};

/// Largest relative mismatch tolerated between loop round trip and clock period.
pub const ROUND_TRIP_TOLERANCE: f64 = 0.01;

/// Most photons a single pulse can contribute to one slot.
const PHOTONS_PER_SLOT: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemuxConfig {
    pub n_slots: usize,
    pub switch_period_cycles: u32,
    pub round_trip_ns: f64,
    pub transverse_shift_mm: f64,
    /// Clear aperture of one slot lane.
    pub aperture_mm: f64,
    /// Rotation success per slot when the cell fires.
    pub pc_on_rotation_efficiency: Vec<f64>,
    /// Spurious rotation per photon and cycle when the cell is idle.
    pub pc_off_leakage: f64,
    /// Transmission of one pass through PBS, prism and cell.
    pub per_pass_transmission: f64,
    pub channel_coupling: Vec<f64>,
    /// Optical path travelled inside the loop by each channel (labels only).
    pub channel_path_length_m: Vec<f64>,
}

impl Default for DemuxConfig {
    fn default() -> Self {
        Self::ideal(4, 6)
    }
}

impl DemuxConfig {
    /// Lossless loop with perfect switching.
    pub fn ideal(n_slots: usize, switch_period_cycles: u32) -> Self {
        Self {
            n_slots,
            switch_period_cycles,
            round_trip_ns: 12.1,
            transverse_shift_mm: 3.0,
            aperture_mm: 3.0,
            pc_on_rotation_efficiency: vec![1.0; n_slots],
            pc_off_leakage: 0.0,
            per_pass_transmission: 1.0,
            channel_coupling: vec![1.0; n_slots],
            channel_path_length_m: (1..=n_slots).map(|k| 3.6 * k as f64).collect(),
        }
    }

    /// The four-slot loop with imperfect switching and coupling that decays
    /// across channels, scaled so the mean channel transmission equals
    /// `0.225 / (0.85 * 4/6)`: the raw per-channel efficiency with detector
    /// efficiency and switching duty removed.
    pub fn paper_preset() -> Self {
        let mut config = Self {
            pc_on_rotation_efficiency: vec![0.97, 0.99, 0.97, 0.96],
            pc_off_leakage: 0.002,
            per_pass_transmission: 0.95,
            channel_coupling: vec![1.0, 0.93, 0.86, 0.79],
            ..Self::ideal(4, 6)
        };
        config
            .calibrate_coupling(0.225 / (0.85 * 4.0 / 6.0))
            .expect("preset calibration target is reachable");
        config
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_slots == 0 {
            return Err(Error::InvalidParameter {
                field: "n_slots",
                reason: "must be at least 1".into(),
            });
        }
        if (self.switch_period_cycles as usize) < self.n_slots {
            return Err(Error::InvalidParameter {
                field: "switch_period_cycles",
                reason: format!("{} is less than n_slots = {}", self.switch_period_cycles, self.n_slots),
            });
        }
        check_positive("round_trip_ns", self.round_trip_ns)?;
        check_positive("transverse_shift_mm", self.transverse_shift_mm)?;
        check_positive("aperture_mm", self.aperture_mm)?;
        check_probability("pc_off_leakage", self.pc_off_leakage)?;
        check_probability("per_pass_transmission", self.per_pass_transmission)?;
        for (field, list) in [
            ("pc_on_rotation_efficiency", &self.pc_on_rotation_efficiency),
            ("channel_coupling", &self.channel_coupling),
            ("channel_path_length_m", &self.channel_path_length_m),
        ] {
            if list.len() != self.n_slots {
                return Err(Error::InvalidParameter {
                    field,
                    reason: format!("has {} entries, expected {}", list.len(), self.n_slots),
                });
            }
        }
        for &value in &self.pc_on_rotation_efficiency {
            check_probability("pc_on_rotation_efficiency", value)?;
        }
        for &value in &self.channel_coupling {
            check_probability("channel_coupling", value)?;
        }
        if self.channel_path_length_m.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter {
                field: "channel_path_length_m",
                reason: "must be strictly increasing".into(),
            });
        }
        Ok(())
    }

    /// Rescales `channel_coupling` so the mean of `channel_transmission`
    /// over all channels equals `target`.
    pub fn calibrate_coupling(&mut self, target: f64) -> Result<()> {
        check_probability("target transmission", target)?;
        self.validate()?;
        let mean = (1..=self.n_slots)
            .map(|k| channel_transmission(self, k))
            .sum::<Result<f64>>()?
            / self.n_slots as f64;
        if mean == 0.0 {
            return Err(Error::InvalidParameter {
                field: "channel_coupling",
                reason: "zero transmission cannot be rescaled".into(),
            });
        }
        let scale = target / mean;
        let scaled: Vec<f64> = self.channel_coupling.iter().map(|c| c * scale).collect();
        if scaled.iter().any(|&c| c > 1.0) {
            return Err(Error::InvalidParameter {
                field: "channel_coupling",
                reason: format!("calibration to {target} needs a coupling above 1"),
            });
        }
        self.channel_coupling = scaled;
        Ok(())
    }

    pub fn duty(&self) -> f64 {
        self.n_slots as f64 / f64::from(self.switch_period_cycles)
    }
}

/// Fibre coupling of a Gaussian beam whose radius grows with the path
/// travelled: `w(z) = w0 sqrt(1 + (z / zR)^2)`, overlap with a fibre mode of
/// radius `w0` is `(2 w w0 / (w^2 + w0^2))^2`.
pub fn couplings_from_mode_growth(
    waist_mm: f64,
    wavelength_nm: f64,
    path_lengths_m: &[f64],
    base_coupling: f64,
) -> Result<Vec<f64>> {
    check_positive("waist_mm", waist_mm)?;
    check_positive("wavelength_nm", wavelength_nm)?;
    check_probability("base_coupling", base_coupling)?;
    let waist_m = waist_mm * 1e-3;
    let rayleigh_m = std::f64::consts::PI * waist_m * waist_m / (wavelength_nm * 1e-9);
    Ok(path_lengths_m
        .iter()
        .map(|&z| {
            let w = waist_m * (1.0 + (z / rayleigh_m).powi(2)).sqrt();
            let overlap = 2.0 * w * waist_m / (w * w + waist_m * waist_m);
            base_coupling * overlap * overlap
        })
        .collect())
}

/// Probability that a photon entering the loop is delivered to `channel`'s
/// fibre: `channel` passes, `channel - 1` idle cycles without leaking, one
/// successful rotation and the channel's coupling.
pub fn channel_transmission(config: &DemuxConfig, channel: usize) -> Result<f64> {
    if channel == 0 || channel > config.n_slots {
        return Err(Error::ChannelOutOfRange {
            channel,
            n_channels: config.n_slots,
        });
    }
    let passes = config.per_pass_transmission.powi(channel as i32);
    let no_leak = (1.0 - config.pc_off_leakage).powi(channel as i32 - 1);
    Ok(passes
        * no_leak
        * config.pc_on_rotation_efficiency[channel - 1]
        * config.channel_coupling[channel - 1])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutputEvent {
    /// 1-based output channel; 0 marks a photon tapped before the loop.
    pub channel: usize,
    pub cycle_index: u64,
    /// Pockels-cell transit instant of the release.
    pub exit_time_ns: f64,
    pub photon: PhotonEvent,
    pub parasitic: bool,
}

impl OutputEvent {
    /// Wraps a source photon as if it were observed directly at the source.
    pub fn from_source(photon: PhotonEvent) -> Self {
        Self {
            channel: 0,
            cycle_index: photon.pulse_index,
            exit_time_ns: photon.emission_time_ns,
            photon,
            parasitic: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoopState {
    /// Slot 0 holds the most recent entry; a photon in slot `k` has made `k`
    /// round trips.
    pub slots: Vec<Vec<PhotonEvent>>,
    pub cycle_index: u64,
}

impl LoopState {
    pub fn empty(n_slots: usize, cycle_index: u64) -> Self {
        Self {
            slots: vec![Vec::new(); n_slots],
            cycle_index,
        }
    }

    pub fn stored(&self) -> usize {
        self.slots.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.iter().all(Vec::is_empty)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepOutcome {
    pub outputs: Vec<OutputEvent>,
    pub clipped: Vec<PhotonEvent>,
}

/// Advances the loop by one clock cycle.
///
/// `uniform(slot, ordinal)` supplies the Bernoulli draw for the photon in
/// `slot` with the given ordinal; it is called once per stored photon.
pub fn step_cycle<F>(
    state: &mut LoopState,
    incoming: &[PhotonEvent],
    pc_fires: bool,
    config: &DemuxConfig,
    clock: &ClockConfig,
    mut uniform: F,
) -> StepOutcome
where
    F: FnMut(usize, u8) -> f64,
{
    let mut outcome = StepOutcome::default();
    let cycle = state.cycle_index;
    let exit_time_ns = clock.instant_ns(cycle);

    if let Some(mut last) = state.slots.pop() {
        outcome.clipped.append(&mut last);
    }
    let mut entering = incoming.to_vec();
    for photon in &mut entering {
        photon.polarization = Polarization::H;
    }
    state.slots.insert(0, entering);

    for (slot, photons) in state.slots.iter_mut().enumerate() {
        if photons.is_empty() {
            continue;
        }
        let flip = if pc_fires {
            config.pc_on_rotation_efficiency[slot]
        } else {
            config.pc_off_leakage
        };
        photons.retain_mut(|photon| {
            photon.attenuate(config.per_pass_transmission);
            if uniform(slot, photon.ordinal) >= flip {
                return true;
            }
            let mut released = *photon;
            released.polarization = Polarization::V;
            released.attenuate(config.channel_coupling[slot]);
            outcome.outputs.push(OutputEvent {
                channel: slot + 1,
                cycle_index: cycle,
                exit_time_ns,
                photon: released,
                parasitic: !pc_fires,
            });
            false
        });
    }
    state.cycle_index += 1;
    outcome
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DemuxStats {
    pub entered: u64,
    pub released: u64,
    pub parasitic: u64,
    pub clipped: u64,
    pub remaining: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemuxOutput {
    /// `channels[k]` holds the events of channel `k + 1` in time order.
    pub channels: Vec<Vec<OutputEvent>>,
    pub stats: DemuxStats,
}

/// Checks that the schedule can drive a loop clocked by `clock`.
pub fn check_schedule_compatibility(
    config: &DemuxConfig,
    clock: &ClockConfig,
    schedule: &TtlSchedule,
) -> Result<()> {
    let period = clock.pulse_period_ns();
    let mismatch = (config.round_trip_ns - period).abs() / period;
    if mismatch > ROUND_TRIP_TOLERANCE {
        return Err(Error::IncompatibleSchedule(format!(
            "loop round trip {} ns differs from the clock period {period:.4} ns by {:.2}%",
            config.round_trip_ns,
            mismatch * 100.0
        )));
    }
    for (index, firing) in schedule.firings.iter().enumerate() {
        let (start, end) = firing.window();
        let transit = clock.instant_ns(firing.cycle_index);
        if !(start <= transit && transit <= end) {
            return Err(Error::IncompatibleSchedule(format!(
                "firing {index} window [{start:.3}, {end:.3}] ns misses the transit of cycle {} at {transit:.3} ns",
                firing.cycle_index
            )));
        }
        if index > 0 && firing.cycle_index <= schedule.firings[index - 1].cycle_index {
            return Err(Error::IncompatibleSchedule(format!(
                "firing {index} does not advance the cycle index"
            )));
        }
    }
    Ok(())
}

/// Runs the loop over cycles `0..n_cycles`.
pub fn run_simulation(
    config: &DemuxConfig,
    clock: &ClockConfig,
    stream: &[PhotonEvent],
    schedule: &TtlSchedule,
    n_cycles: u64,
    seed: u64,
) -> Result<DemuxOutput> {
    run_simulation_range(config, clock, stream, schedule, 0..n_cycles, seed)
}

/// Runs the loop over a window of cycles and returns the outputs produced in
/// it. The loop is replayed from `n_slots` cycles before the window starts,
/// which rebuilds its exact state because no photon survives more than
/// `n_slots` cycles without being released or clipped. `stream` must hold
/// every photon of the replayed pulses; photons outside are ignored.
pub fn run_simulation_range(
    config: &DemuxConfig,
    clock: &ClockConfig,
    stream: &[PhotonEvent],
    schedule: &TtlSchedule,
    cycles: Range<u64>,
    seed: u64,
) -> Result<DemuxOutput> {
    config.validate()?;
    clock.validate()?;
    check_schedule_compatibility(config, clock, schedule)?;

    let warmup_start = cycles.start.saturating_sub(config.n_slots as u64);
    let mut state = LoopState::empty(config.n_slots, warmup_start);
    let mut channels = vec![Vec::new(); config.n_slots];
    let mut stats = DemuxStats::default();

    let mut photons = stream
        .iter()
        .skip_while(|p| p.pulse_index < warmup_start)
        .peekable();
    let firings: Vec<u64> = schedule.firing_cycle_indices().collect();
    let mut next_firing = firings.partition_point(|&c| c < warmup_start);

    let draws_per_cycle = config.n_slots * PHOTONS_PER_SLOT;
    let mut keyed = KeyedRng::new(seed, Domain::Demux, 2 * draws_per_cycle as u32);
    let mut draws = vec![0.0; draws_per_cycle];
    let mut incoming = Vec::with_capacity(PHOTONS_PER_SLOT);

    for cycle in warmup_start..cycles.end {
        incoming.clear();
        while let Some(p) = photons.next_if(|p| p.pulse_index == cycle) {
            incoming.push(*p);
        }
        let fires = firings.get(next_firing) == Some(&cycle);
        if fires {
            next_firing += 1;
        }
        if state.is_empty() && incoming.is_empty() {
            state.cycle_index += 1;
            continue;
        }
        let rng = keyed.at(cycle);
        for d in draws.iter_mut() {
            *d = rng.random();
        }
        let counted = cycle >= cycles.start;
        let stored_before = state.stored() + incoming.len();
        let outcome = step_cycle(&mut state, &incoming, fires, config, clock, |slot, ordinal| {
            let ordinal = usize::from(ordinal).min(PHOTONS_PER_SLOT - 1);
            draws[slot * PHOTONS_PER_SLOT + ordinal]
        });
        debug_assert_eq!(
            stored_before,
            state.stored() + outcome.outputs.len() + outcome.clipped.len()
        );
        if counted {
            stats.entered += incoming.len() as u64;
            stats.clipped += outcome.clipped.len() as u64;
            for event in outcome.outputs {
                if event.parasitic {
                    stats.parasitic += 1;
                } else {
                    stats.released += 1;
                }
                channels[event.channel - 1].push(event);
            }
        }
    }
    stats.remaining = state.stored() as u64;
    Ok(DemuxOutput { channels, stats })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock_source::{generate_stream, SourceModel};
    use crate::control_sequencer::{build_schedule, DriverConstraints, ScheduleTiming};

    fn clock() -> ClockConfig {
        ClockConfig::from_period_ns(12.1).unwrap()
    }

    fn photon(pulse: u64) -> PhotonEvent {
        PhotonEvent::new(pulse, 0, &clock())
    }

    fn always(value: f64) -> impl FnMut(usize, u8) -> f64 {
        move |_, _| value
    }

    #[test]
    fn ideal_burst_loses_two_of_six() {
        let config = DemuxConfig::ideal(4, 6);
        let mut state = LoopState::empty(4, 0);
        let mut outputs = Vec::new();
        let mut clipped = Vec::new();
        for cycle in 0..6 {
            let outcome = step_cycle(
                &mut state,
                &[photon(cycle)],
                cycle == 5,
                &config,
                &clock(),
                always(0.5),
            );
            outputs.extend(outcome.outputs);
            clipped.extend(outcome.clipped);
        }
        let mut routed: Vec<(u64, usize)> = outputs
            .iter()
            .map(|e| (e.photon.pulse_index, e.channel))
            .collect();
        routed.sort();
        assert_eq!(routed, vec![(2, 4), (3, 3), (4, 2), (5, 1)]);
        let mut lost: Vec<u64> = clipped.iter().map(|p| p.pulse_index).collect();
        lost.sort();
        assert_eq!(lost, vec![0, 1]);
        assert!(state.is_empty());
        let t = outputs[0].exit_time_ns;
        assert!(outputs.iter().all(|e| e.exit_time_ns == t && !e.parasitic));
    }

    #[test]
    fn empty_loop_firing_releases_nothing() {
        let mut state = LoopState::empty(4, 0);
        let outcome = step_cycle(&mut state, &[], true, &DemuxConfig::default(), &clock(), always(0.0));
        assert!(outcome.outputs.is_empty());
        assert!(outcome.clipped.is_empty());
    }

    #[test]
    fn leakage_ejections_match_binomial_bound() {
        let config = DemuxConfig {
            pc_off_leakage: 0.01,
            ..DemuxConfig::default()
        };
        let c = clock();
        let mut keyed = KeyedRng::new(17, Domain::Demux, 2);
        let trials = 1_000_000u64;
        let mut parasitic = 0u64;
        for trial in 0..trials {
            let mut state = LoopState::empty(4, 0);
            state.slots[0].push(photon(0));
            let u: f64 = keyed.at(trial).random();
            let outcome = step_cycle(&mut state, &[], false, &config, &c, |_, _| u);
            parasitic += outcome.outputs.iter().filter(|e| e.parasitic).count() as u64;
        }
        let mean = trials as f64 * 0.01;
        let sigma = (trials as f64 * 0.01 * 0.99).sqrt();
        assert!((parasitic as f64 - mean).abs() < 4.0 * sigma, "{parasitic}");
    }

    #[test]
    fn failed_rotation_keeps_photon_circulating() {
        let config = DemuxConfig::ideal(4, 4);
        let mut state = LoopState::empty(4, 0);
        let outcome = step_cycle(&mut state, &[photon(0)], true, &config, &clock(), always(1.0));
        assert!(outcome.outputs.is_empty());
        assert_eq!(state.slots[0].len(), 1);
    }

    #[test]
    fn channel_transmission_examples() {
        assert_eq!(channel_transmission(&DemuxConfig::default(), 3).unwrap(), 1.0);
        let lossy = DemuxConfig {
            per_pass_transmission: 0.95,
            ..DemuxConfig::default()
        };
        let oracle = 0.95 * 0.95 * 0.95 * 0.95;
        assert!((channel_transmission(&lossy, 4).unwrap() - oracle).abs() < 1e-15);
        assert!((oracle - 0.8145).abs() < 1e-4);
        assert!(matches!(
            channel_transmission(&lossy, 5),
            Err(Error::ChannelOutOfRange { .. })
        ));
        assert!(channel_transmission(&lossy, 0).is_err());
    }

    #[test]
    fn preset_mean_transmission_matches_raw_efficiency() {
        let config = DemuxConfig::paper_preset();
        config.validate().unwrap();
        let t: Vec<f64> = (1..=4).map(|k| channel_transmission(&config, k).unwrap()).collect();
        let mean = t.iter().sum::<f64>() / 4.0;
        assert!((mean * 0.85 * 4.0 / 6.0 - 0.225).abs() < 1e-12);
        assert!(t.windows(2).all(|w| w[1] < w[0]), "{t:?}");
    }

    #[test]
    fn config_validation() {
        let mut c = DemuxConfig::default();
        c.switch_period_cycles = 3;
        assert!(c.validate().is_err());
        let mut c = DemuxConfig::default();
        c.channel_path_length_m = vec![3.6, 3.6, 10.8, 14.4];
        assert!(c.validate().is_err());
        let mut c = DemuxConfig::default();
        c.channel_coupling.pop();
        assert!(c.validate().is_err());
        let mut c = DemuxConfig::default();
        c.pc_off_leakage = 1.5;
        assert!(c.validate().is_err());
    }

    #[test]
    fn mode_growth_coupling_decays() {
        let c = couplings_from_mode_growth(0.5, 918.8, &[3.6, 7.2, 10.8, 14.4], 0.9).unwrap();
        assert!(c.windows(2).all(|w| w[1] < w[0]));
        assert!(c[0] < 0.9);
        let flat = couplings_from_mode_growth(0.5, 918.8, &[0.0], 0.9).unwrap();
        assert!((flat[0] - 0.9).abs() < 1e-12);
    }

    fn schedule(clock: &ClockConfig, n_cycles: u64) -> TtlSchedule {
        build_schedule(
            clock,
            &DriverConstraints::default(),
            6,
            (n_cycles / 6) as usize,
            &ScheduleTiming::default(),
        )
        .unwrap()
    }

    #[test]
    fn mean_survival_per_channel_follows_pass_count() {
        let c = ClockConfig::new(82.6e6).unwrap();
        let config = DemuxConfig {
            per_pass_transmission: 0.9,
            ..DemuxConfig::default()
        };
        let source = SourceModel {
            brightness: 1.0,
            g2_zero: 0.0,
            ..SourceModel::default()
        };
        let n = 6_000;
        let stream = generate_stream(&source, &c, n, 1).unwrap();
        let out = run_simulation(&config, &c, &stream, &schedule(&c, n), n, 1).unwrap();
        for (k, events) in out.channels.iter().enumerate() {
            let mean = events.iter().map(|e| e.photon.survival_prob()).sum::<f64>()
                / events.len() as f64;
            assert!((mean - 0.9f64.powi(k as i32 + 1)).abs() < 1e-12);
        }
    }

    #[test]
    fn mismatched_round_trip_is_rejected() {
        let c = ClockConfig::new(82.6e6).unwrap();
        let config = DemuxConfig {
            round_trip_ns: 13.0,
            ..DemuxConfig::default()
        };
        let result = run_simulation(&config, &c, &[], &schedule(&c, 60), 60, 0);
        assert!(matches!(result, Err(Error::IncompatibleSchedule(_))));
    }

    #[test]
    fn schedule_off_the_clock_is_rejected() {
        let c = ClockConfig::new(82.6e6).unwrap();
        let mut s = schedule(&c, 60);
        for f in &mut s.firings {
            f.cycle_index += 1;
        }
        let result = run_simulation(&DemuxConfig::default(), &c, &[], &s, 60, 0);
        assert!(matches!(result, Err(Error::IncompatibleSchedule(_))));
    }

    #[test]
    fn zero_brightness_gives_empty_channels() {
        let c = ClockConfig::new(82.6e6).unwrap();
        let out = run_simulation(&DemuxConfig::paper_preset(), &c, &[], &schedule(&c, 600), 600, 0)
            .unwrap();
        assert!(out.channels.iter().all(Vec::is_empty));
    }
}
