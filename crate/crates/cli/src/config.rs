//! Run configuration: a sectioned TOML file whose keys carry their units.

use std::path::{Path, PathBuf};

use loopdemux_core::clock_source::{brightness_from_rate, ClockConfig, SourceModel};
use loopdemux_core::control_sequencer::{DriverConstraints, ScheduleTiming};
use loopdemux_core::detection::{BeamsplitterModel, DetectorModel};
use loopdemux_core::loop_demux::DemuxConfig;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClockSection {
    pub rep_rate_hz: f64,
}

impl Default for ClockSection {
    fn default() -> Self {
        Self { rep_rate_hz: 82.6e6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SourceSection {
    /// Per-pulse single-photon probability. Ignored when `count_rate_hz` is set.
    pub brightness: f64,
    /// Detected count rate from which the brightness is derived.
    pub count_rate_hz: Option<f64>,
    /// Divide the derived brightness by the detector efficiency.
    pub correct_for_detector: bool,
    pub g2_zero: f64,
    pub indistinguishability: f64,
    pub indistinguishability_decay: f64,
}

impl Default for SourceSection {
    fn default() -> Self {
        let s = SourceModel::default();
        Self {
            brightness: s.brightness,
            count_rate_hz: None,
            correct_for_detector: false,
            g2_zero: s.g2_zero,
            indistinguishability: s.indistinguishability,
            indistinguishability_decay: s.indistinguishability_decay,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DemuxSection {
    pub n_slots: usize,
    pub switch_period_cycles: u32,
    pub round_trip_ns: f64,
    pub transverse_shift_mm: f64,
    pub aperture_mm: f64,
    pub pc_on_rotation_efficiency: Vec<f64>,
    pub pc_off_leakage: f64,
    pub per_pass_transmission: f64,
    pub channel_coupling: Vec<f64>,
    pub channel_path_length_m: Vec<f64>,
    /// Rescale the couplings so the mean channel transmission hits this value.
    pub target_mean_transmission: Option<f64>,
}

impl Default for DemuxSection {
    fn default() -> Self {
        Self::from_config(&DemuxConfig::default())
    }
}

impl DemuxSection {
    fn from_config(c: &DemuxConfig) -> Self {
        Self {
            n_slots: c.n_slots,
            switch_period_cycles: c.switch_period_cycles,
            round_trip_ns: c.round_trip_ns,
            transverse_shift_mm: c.transverse_shift_mm,
            aperture_mm: c.aperture_mm,
            pc_on_rotation_efficiency: c.pc_on_rotation_efficiency.clone(),
            pc_off_leakage: c.pc_off_leakage,
            per_pass_transmission: c.per_pass_transmission,
            channel_coupling: c.channel_coupling.clone(),
            channel_path_length_m: c.channel_path_length_m.clone(),
            target_mean_transmission: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DriverSection {
    pub min_switch_interval_ns: f64,
    pub pulse_length_ns: f64,
    pub max_continuous_rate_hz: f64,
    pub first_firing_cycle: Option<u64>,
    pub phase_ns: f64,
    pub ttl_lead_ns: f64,
    pub rise_ns: f64,
    pub fall_ns: f64,
}

impl Default for DriverSection {
    fn default() -> Self {
        let d = DriverConstraints::default();
        let t = ScheduleTiming::default();
        Self {
            min_switch_interval_ns: d.min_switch_interval_ns,
            pulse_length_ns: d.pulse_length_ns,
            max_continuous_rate_hz: d.max_continuous_rate_hz,
            first_firing_cycle: t.first_firing_cycle,
            phase_ns: t.phase_ns,
            ttl_lead_ns: t.ttl_lead_ns,
            rise_ns: t.rise_ns,
            fall_ns: t.fall_ns,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorSection {
    pub efficiency: f64,
    pub dead_time_ns: f64,
    pub jitter_sigma_ns: f64,
    pub dark_count_rate_hz: f64,
}

impl Default for DetectorSection {
    fn default() -> Self {
        let d = DetectorModel::default();
        Self {
            efficiency: d.efficiency,
            dead_time_ns: d.dead_time_ns,
            jitter_sigma_ns: d.jitter_sigma_ns,
            dark_count_rate_hz: d.dark_count_rate_hz,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BeamsplitterSection {
    pub reflectance: f64,
    pub transmittance: f64,
    pub classical_visibility: f64,
}

impl Default for BeamsplitterSection {
    fn default() -> Self {
        let b = BeamsplitterModel::default();
        Self {
            reflectance: b.reflectance,
            transmittance: b.transmittance,
            classical_visibility: b.classical_visibility,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub n_pulses: u64,
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Pulses per parallel work unit. Outputs do not depend on it.
    pub shard_pulses: u64,
    /// Channel pairs mixed on the beamsplitter, 1-based.
    pub hom_pairs: Vec<[usize; 2]>,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            n_pulses: 1_000_000,
            seed: 42,
            output_dir: PathBuf::from("out"),
            shard_pulses: 1 << 20,
            hom_pairs: vec![[1, 2], [2, 3], [3, 4], [1, 3], [1, 4]],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSection {
    pub bin_width_ns: f64,
    /// Peak integration half-width; a quarter of the clock period when unset.
    pub halfwidth_ns: Option<f64>,
    pub n_side_peaks: usize,
    /// Coincidence orders with fewer total counts are left out of the fit.
    pub min_coincidence_counts: u64,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self {
            bin_width_ns: 0.1,
            halfwidth_ns: None,
            n_side_peaks: 10,
            min_coincidence_counts: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub clock: ClockSection,
    pub source: SourceSection,
    pub demux: DemuxSection,
    pub driver: DriverSection,
    pub detector: DetectorSection,
    pub beamsplitter: BeamsplitterSection,
    pub run: RunSection,
    pub analysis: AnalysisSection,
}

/// Validated core models built from a [`RunConfig`].
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub clock: ClockConfig,
    pub source: SourceModel,
    pub demux: DemuxConfig,
    pub constraints: DriverConstraints,
    pub timing: ScheduleTiming,
    pub detector: DetectorModel,
    pub beamsplitter: BeamsplitterModel,
}

impl RunConfig {
    /// Every reported experimental value, ten million pulses.
    pub fn paper() -> Self {
        let mut config = Self::default();
        config.source.count_rate_hz = Some(5e6);
        config.demux = DemuxSection::from_config(&DemuxConfig::paper_preset());
        config.run.n_pulses = 10_000_000;
        config
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn resolve(&self) -> Result<Resolved, CliError> {
        if self.run.n_pulses == 0 {
            return Err(CliError::Config("run.n_pulses: must be at least 1".into()));
        }
        if self.run.shard_pulses == 0 {
            return Err(CliError::Config("run.shard_pulses: must be at least 1".into()));
        }
        let section = |name: &'static str| move |e: loopdemux_core::Error| CliError::Config(format!("{name}: {e}"));

        let clock = ClockConfig::new(self.clock.rep_rate_hz).map_err(section("clock"))?;
        let detector = DetectorModel {
            efficiency: self.detector.efficiency,
            dead_time_ns: self.detector.dead_time_ns,
            jitter_sigma_ns: self.detector.jitter_sigma_ns,
            dark_count_rate_hz: self.detector.dark_count_rate_hz,
        };
        detector.validate().map_err(section("detector"))?;

        let s = &self.source;
        let brightness = match s.count_rate_hz {
            Some(rate) => {
                let raw = brightness_from_rate(rate, clock.rep_rate_hz).map_err(section("source"))?;
                if s.correct_for_detector {
                    raw / detector.efficiency
                } else {
                    raw
                }
            }
            None => s.brightness,
        };
        let source = SourceModel {
            brightness,
            g2_zero: s.g2_zero,
            indistinguishability: s.indistinguishability,
            indistinguishability_decay: s.indistinguishability_decay,
            count_rate_hz: s.count_rate_hz,
        };
        source.emission_probabilities().map_err(section("source"))?;

        let d = &self.demux;
        let mut demux = DemuxConfig {
            n_slots: d.n_slots,
            switch_period_cycles: d.switch_period_cycles,
            round_trip_ns: d.round_trip_ns,
            transverse_shift_mm: d.transverse_shift_mm,
            aperture_mm: d.aperture_mm,
            pc_on_rotation_efficiency: d.pc_on_rotation_efficiency.clone(),
            pc_off_leakage: d.pc_off_leakage,
            per_pass_transmission: d.per_pass_transmission,
            channel_coupling: d.channel_coupling.clone(),
            channel_path_length_m: d.channel_path_length_m.clone(),
        };
        demux.validate().map_err(section("demux"))?;
        if let Some(target) = d.target_mean_transmission {
            demux.calibrate_coupling(target).map_err(section("demux"))?;
        }

        let constraints = DriverConstraints {
            min_switch_interval_ns: self.driver.min_switch_interval_ns,
            pulse_length_ns: self.driver.pulse_length_ns,
            max_continuous_rate_hz: self.driver.max_continuous_rate_hz,
        };
        constraints.validate().map_err(section("driver"))?;
        let timing = ScheduleTiming {
            first_firing_cycle: self.driver.first_firing_cycle,
            phase_ns: self.driver.phase_ns,
            ttl_lead_ns: self.driver.ttl_lead_ns,
            rise_ns: self.driver.rise_ns,
            fall_ns: self.driver.fall_ns,
        };
        timing.validate().map_err(section("driver"))?;

        let beamsplitter = BeamsplitterModel {
            reflectance: self.beamsplitter.reflectance,
            transmittance: self.beamsplitter.transmittance,
            classical_visibility: self.beamsplitter.classical_visibility,
        };
        beamsplitter.validate().map_err(section("beamsplitter"))?;

        for pair in &self.run.hom_pairs {
            if pair[0] == pair[1] || pair.iter().any(|&k| k == 0 || k > demux.n_slots) {
                return Err(CliError::Config(format!(
                    "run.hom_pairs: {pair:?} must name two distinct channels in 1..={}",
                    demux.n_slots
                )));
            }
        }
        if self.analysis.bin_width_ns.is_nan() || self.analysis.bin_width_ns <= 0.0 {
            return Err(CliError::Config("analysis.bin_width_ns: must be positive".into()));
        }
        if self.analysis.n_side_peaks == 0 {
            return Err(CliError::Config("analysis.n_side_peaks: must be at least 1".into()));
        }

        Ok(Resolved {
            clock,
            source,
            demux,
            constraints,
            timing,
            detector,
            beamsplitter,
        })
    }

    /// Peak integration half-width for this clock.
    pub fn halfwidth_ns(&self, clock: &ClockConfig) -> f64 {
        self.analysis
            .halfwidth_ns
            .unwrap_or(clock.pulse_period_ns() / 4.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_the_default() {
        assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
    }

    #[test]
    fn partial_sections_keep_defaults() {
        let c = RunConfig::from_toml("[run]\nseed = 7\n").unwrap();
        assert_eq!(c.run.seed, 7);
        assert_eq!(c.run.n_pulses, RunSection::default().n_pulses);
    }

    #[test]
    fn unknown_key_is_named() {
        let err = RunConfig::from_toml("[demux]\nround_trip = 12.1\n").unwrap_err();
        assert!(err.to_string().contains("round_trip"), "{err}");
    }

    #[test]
    fn zero_pulses_names_the_field() {
        let c = RunConfig::from_toml("[run]\nn_pulses = 0\n").unwrap();
        assert!(c.resolve().unwrap_err().to_string().contains("n_pulses"));
    }

    #[test]
    fn paper_preset_resolves() {
        let r = RunConfig::paper().resolve().unwrap();
        assert!((r.source.brightness - 5.0 / 82.6).abs() < 1e-12);
        assert_eq!(r.demux, DemuxConfig::paper_preset());
    }

    #[test]
    fn round_trip_through_text() {
        let c = RunConfig::paper();
        assert_eq!(RunConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn detector_correction_raises_brightness() {
        let mut c = RunConfig::paper();
        c.source.correct_for_detector = true;
        let r = c.resolve().unwrap();
        assert!((r.source.brightness - 5.0 / 82.6 / 0.85).abs() < 1e-12);
    }
}
