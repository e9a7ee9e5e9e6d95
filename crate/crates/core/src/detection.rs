//! Single-photon detectors and the two-photon interference beamsplitter.
//!
//! Detection first draws one candidate click per photon (keyed by the photon,
//! so the result does not depend on the order or grouping of the input), then
//! sorts the candidates and applies non-paralysable dead time. Tags are
//! quantised to 1 ps.

use std::collections::BTreeMap;
use std::ops::Range;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::clock_source::{ClockConfig, PhotonEvent};
use crate::error::{check_non_negative, check_probability, Error, Result};
use crate::loop_demux::OutputEvent;
use crate::rng::{Domain, KeyedRng};

/// Timing resolution of recorded tags.
pub const PS_PER_NS: f64 = 1000.0;

/// Detector ids at and above this value belong to splitter output ports.
pub const SPLITTER_DETECTOR_BASE: u32 = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorModel {
    pub efficiency: f64,
    pub dead_time_ns: f64,
    pub jitter_sigma_ns: f64,
    pub dark_count_rate_hz: f64,
}

impl Default for DetectorModel {
    fn default() -> Self {
        Self {
            efficiency: 0.85,
            dead_time_ns: 0.0,
            jitter_sigma_ns: 0.0,
            dark_count_rate_hz: 0.0,
        }
    }
}

impl DetectorModel {
    pub fn ideal() -> Self {
        Self {
            efficiency: 1.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_probability("efficiency", self.efficiency)?;
        check_non_negative("dead_time_ns", self.dead_time_ns)?;
        check_non_negative("jitter_sigma_ns", self.jitter_sigma_ns)?;
        check_non_negative("dark_count_rate_hz", self.dark_count_rate_hz)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamsplitterModel {
    pub reflectance: f64,
    pub transmittance: f64,
    /// Residual visibility measured with classical light.
    pub classical_visibility: f64,
}

impl Default for BeamsplitterModel {
    fn default() -> Self {
        Self {
            reflectance: 0.51,
            transmittance: 0.49,
            classical_visibility: 0.05,
        }
    }
}

impl BeamsplitterModel {
    pub fn balanced() -> Self {
        Self {
            reflectance: 0.5,
            transmittance: 0.5,
            classical_visibility: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_probability("reflectance", self.reflectance)?;
        check_probability("transmittance", self.transmittance)?;
        if (self.reflectance + self.transmittance - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter {
                field: "transmittance",
                reason: format!(
                    "R + T = {} must equal 1",
                    self.reflectance + self.transmittance
                ),
            });
        }
        check_probability("classical_visibility", self.classical_visibility)
    }

    /// Overlap reaching the splitter after the classical-visibility penalty.
    pub fn effective_visibility(&self, overlap: f64) -> f64 {
        overlap * (1.0 - self.classical_visibility.powi(2))
    }

    /// Probability that two co-arriving photons leave by different ports.
    pub fn different_port_probability(&self, overlap: f64) -> f64 {
        let (r, t) = (self.reflectance, self.transmittance);
        r * r + t * t - 2.0 * r * t * self.effective_visibility(overlap)
    }
}

/// Detector clicks on one channel, strictly increasing, in picoseconds.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TimeTagStream {
    pub channel_id: u32,
    tags_ps: Vec<i64>,
}

impl TimeTagStream {
    pub fn new(channel_id: u32, tags_ps: Vec<i64>) -> Result<Self> {
        if let Some(index) = tags_ps.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::UnsortedTags { index: index + 1 });
        }
        Ok(Self { channel_id, tags_ps })
    }

    pub fn tags_ps(&self) -> &[i64] {
        &self.tags_ps
    }

    pub fn tags_ns(&self) -> impl Iterator<Item = f64> + '_ {
        self.tags_ps.iter().map(|&t| t as f64 / PS_PER_NS)
    }

    pub fn len(&self) -> usize {
        self.tags_ps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags_ps.is_empty()
    }
}

/// Something a detector can click on.
pub trait Detectable {
    /// Unique key addressing this item's random draws.
    fn key(&self) -> u64;
    fn arrival_ns(&self) -> f64;
    /// Probability the photon still exists when it reaches the detector.
    fn survival(&self) -> f64;
}

impl Detectable for OutputEvent {
    fn key(&self) -> u64 {
        self.photon.key()
    }
    fn arrival_ns(&self) -> f64 {
        self.exit_time_ns
    }
    fn survival(&self) -> f64 {
        self.photon.survival_prob()
    }
}

/// A photon that has been routed to a splitter output port.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PortEvent {
    pub cycle_index: u64,
    pub time_ns: f64,
    pub photon: PhotonEvent,
}

impl Detectable for PortEvent {
    fn key(&self) -> u64 {
        self.photon.key()
    }
    fn arrival_ns(&self) -> f64 {
        self.time_ns
    }
    fn survival(&self) -> f64 {
        1.0
    }
}

fn to_ps(time_ns: f64) -> i64 {
    (time_ns * PS_PER_NS).round() as i64
}

/// Unfiltered click times for `events` on detector `detector_id`.
pub fn candidate_clicks<E: Detectable>(
    events: &[E],
    path_delay_ns: f64,
    detector: &DetectorModel,
    detector_id: u32,
    seed: u64,
) -> Vec<i64> {
    let mut keyed = KeyedRng::new(seed, Domain::Detector(detector_id), 16);
    let mut clicks = Vec::new();
    for event in events {
        let rng = keyed.at(event.key());
        let u: f64 = rng.random();
        let jitter: f64 = rng.sample(StandardNormal);
        if u < event.survival() * detector.efficiency {
            let time = event.arrival_ns() + path_delay_ns + jitter * detector.jitter_sigma_ns;
            clicks.push(to_ps(time));
        }
    }
    clicks
}

/// Dark clicks over a range of clock cycles, one Bernoulli trial per cycle.
pub fn dark_counts(
    detector: &DetectorModel,
    clock: &ClockConfig,
    cycles: Range<u64>,
    detector_id: u32,
    seed: u64,
) -> Vec<i64> {
    if detector.dark_count_rate_hz == 0.0 || cycles.is_empty() {
        return Vec::new();
    }
    let period = clock.pulse_period_ns();
    let p = (detector.dark_count_rate_hz * period * 1e-9).min(1.0);
    let mut keyed = KeyedRng::new(seed, Domain::DarkCounts(detector_id), 4);
    let rng = keyed.at(cycles.start);
    cycles
        .filter_map(|cycle| {
            let hit: f64 = rng.random();
            let offset: f64 = rng.random();
            (hit < p).then(|| to_ps(clock.instant_ns(cycle) + offset * period))
        })
        .collect()
}

/// Sorts candidate clicks and keeps each one that comes at least `dead_time`
/// after the last kept click. Coincident clicks collapse into one.
pub fn apply_dead_time(mut clicks: Vec<i64>, dead_time_ns: f64) -> Vec<i64> {
    clicks.sort_unstable();
    let dead_ps = to_ps(dead_time_ns).max(1);
    let mut kept: Vec<i64> = Vec::with_capacity(clicks.len());
    for t in clicks {
        match kept.last() {
            Some(&last) if t - last < dead_ps => {}
            _ => kept.push(t),
        }
    }
    kept
}

/// Detector response to a sequence of arrivals.
pub fn detect<E: Detectable>(
    events: &[E],
    path_delay_ns: f64,
    detector: &DetectorModel,
    detector_id: u32,
    seed: u64,
) -> TimeTagStream {
    let clicks = candidate_clicks(events, path_delay_ns, detector, detector_id, seed);
    TimeTagStream {
        channel_id: detector_id,
        tags_ps: apply_dead_time(clicks, detector.dead_time_ns),
    }
}

/// Probabilities of the four port assignments `(first photon port, second
/// photon port)` for a co-arriving pair, ports numbered 0 and 1.
pub fn pair_outcome_probabilities(bs: &BeamsplitterModel, overlap: f64) -> [[f64; 2]; 2] {
    let different = bs.different_port_probability(overlap);
    let same = 1.0 - different;
    let (r, t) = (bs.reflectance, bs.transmittance);
    // distinguishable split between the two different-port outcomes is r^2 : t^2
    let first_reflected = r * r / (r * r + t * t);
    [
        [same / 2.0, different * first_reflected],
        [different * (1.0 - first_reflected), same / 2.0],
    ]
}

/// Routes two channels through the splitter. Photons are first realised
/// against their survival probability; survivors meeting in the same cycle
/// pair up in order and interfere, the rest route alone. Input `a` reflects
/// into port 0, input `b` reflects into port 1.
pub fn route_through_splitter<F>(
    a: &[OutputEvent],
    b: &[OutputEvent],
    bs: &BeamsplitterModel,
    overlap: F,
    splitter_id: u32,
    seed: u64,
) -> (Vec<PortEvent>, Vec<PortEvent>)
where
    F: Fn(&PhotonEvent, &PhotonEvent) -> f64,
{
    let mut groups: BTreeMap<u64, (Vec<&OutputEvent>, Vec<&OutputEvent>)> = BTreeMap::new();
    for event in a {
        groups.entry(event.cycle_index).or_default().0.push(event);
    }
    for event in b {
        groups.entry(event.cycle_index).or_default().1.push(event);
    }

    let mut keyed = KeyedRng::new(seed, Domain::Splitter(splitter_id), 32);
    let mut ports = (Vec::new(), Vec::new());
    let (r, t) = (bs.reflectance, bs.transmittance);
    for (cycle, (from_a, from_b)) in groups {
        let rng = keyed.at(cycle);
        let mut survivors = |events: Vec<&OutputEvent>| -> Vec<OutputEvent> {
            events
                .into_iter()
                .filter(|e| rng.random::<f64>() < e.photon.survival_prob())
                .copied()
                .collect()
        };
        let live_a = survivors(from_a);
        let live_b = survivors(from_b);
        let mut emit = |event: &OutputEvent, port: usize| {
            let routed = PortEvent {
                cycle_index: event.cycle_index,
                time_ns: event.exit_time_ns,
                photon: event.photon,
            };
            if port == 0 {
                ports.0.push(routed);
            } else {
                ports.1.push(routed);
            }
        };
        let pairs = live_a.len().min(live_b.len());
        for (ea, eb) in live_a.iter().zip(&live_b) {
            let table = pair_outcome_probabilities(bs, overlap(&ea.photon, &eb.photon));
            let u: f64 = rng.random();
            let (pa, pb) = if u < table[0][0] {
                (0, 0)
            } else if u < table[0][0] + table[0][1] {
                (0, 1)
            } else if u < table[0][0] + table[0][1] + table[1][0] {
                (1, 0)
            } else {
                (1, 1)
            };
            emit(ea, pa);
            emit(eb, pb);
        }
        for event in &live_a[pairs..] {
            let reflected = rng.random::<f64>() < r;
            emit(event, if reflected { 0 } else { 1 });
        }
        for event in &live_b[pairs..] {
            let transmitted = rng.random::<f64>() < t;
            emit(event, if transmitted { 0 } else { 1 });
        }
    }
    ports
}

/// Hong-Ou-Mandel measurement: splitter followed by one detector per port.
pub fn hom_mix<F>(
    a: &[OutputEvent],
    b: &[OutputEvent],
    bs: &BeamsplitterModel,
    overlap: F,
    detectors: [&DetectorModel; 2],
    measurement_id: u32,
    seed: u64,
) -> (TimeTagStream, TimeTagStream)
where
    F: Fn(&PhotonEvent, &PhotonEvent) -> f64,
{
    let (port0, port1) = route_through_splitter(a, b, bs, overlap, measurement_id, seed);
    let id0 = SPLITTER_DETECTOR_BASE + measurement_id * 2;
    let id1 = id0 + 1;
    (
        detect(&port0, 0.0, detectors[0], id0, seed),
        detect(&port1, 0.0, detectors[1], id1, seed),
    )
}
