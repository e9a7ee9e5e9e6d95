//! Simulation and analysis stages behind the `simulate` and `analyze` commands.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::ops::Range;
use std::path::{Path, PathBuf};

use loopdemux_core::analysis::{
    channel_efficiency, correlate, distinguishable_normalized_ratio, fit_exponential, g2_zero,
    hom_corrected, hom_uncorrected, CoincidenceCounts, CorrelationHistogram, PeakAreas,
    PeakWindows,
};
use loopdemux_core::clock_source::{generate_range, PhotonEvent};
use loopdemux_core::control_sequencer::{build_schedule, Ratio, TtlSchedule};
use loopdemux_core::detection::{
    apply_dead_time, candidate_clicks, dark_counts, route_through_splitter, BeamsplitterModel,
    Detectable, DetectorModel, TimeTagStream, SPLITTER_DETECTOR_BASE,
};
use loopdemux_core::io::{read_time_tags, write_events, write_histogram, write_schedule, write_time_tags};
use loopdemux_core::loop_demux::{channel_transmission, run_simulation_range, DemuxStats, OutputEvent};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Resolved, RunConfig};
use crate::error::{io_error, CliError};

pub const MANIFEST: &str = "manifest.json";
pub const SUMMARY: &str = "summary.json";
const SOURCE_SPLITTER: u32 = 0;

fn channel_splitter(channel: usize) -> u32 {
    10 + channel as u32
}

fn pair_splitter(pair: [usize; 2]) -> u32 {
    100 + 10 * pair[0] as u32 + pair[1] as u32
}

pub fn channel_file(channel: usize) -> String {
    format!("channel_{channel}.csv")
}

pub fn events_file(channel: usize) -> String {
    format!("events_ch{channel}.csv")
}

pub fn hbt_files(label: &str) -> [String; 2] {
    [format!("{label}_hbt0.csv"), format!("{label}_hbt1.csv")]
}

pub fn hom_files(pair: [usize; 2]) -> [String; 2] {
    let [i, j] = pair;
    [format!("hom_{i}{j}_port0.csv"), format!("hom_{i}{j}_port1.csv")]
}

fn channel_label(channel: usize) -> String {
    format!("ch{channel}")
}

/// Photons released by the loop plus the unfiltered source stream.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub source: Vec<PhotonEvent>,
    pub channels: Vec<Vec<OutputEvent>>,
    pub stats: DemuxStats,
    pub schedule: TtlSchedule,
}

/// Firings that fall inside the first `n_pulses` cycles.
fn firing_count(first: u64, period: u32, n_pulses: u64) -> usize {
    if first >= n_pulses {
        0
    } else {
        ((n_pulses - 1 - first) / u64::from(period) + 1) as usize
    }
}

pub fn schedule_for(resolved: &Resolved, n_pulses: u64) -> Result<TtlSchedule, CliError> {
    let period = resolved.demux.switch_period_cycles;
    let first = resolved
        .timing
        .first_firing_cycle
        .unwrap_or(u64::from(period) - 1);
    let n = firing_count(first, period, n_pulses);
    Ok(build_schedule(
        &resolved.clock,
        &resolved.constraints,
        period,
        n,
        &resolved.timing,
    )?)
}

fn shards(n_pulses: u64, shard_pulses: u64) -> Vec<Range<u64>> {
    (0..n_pulses.div_ceil(shard_pulses))
        .map(|i| i * shard_pulses..((i + 1) * shard_pulses).min(n_pulses))
        .collect()
}

pub fn simulate(config: &RunConfig) -> Result<Simulation, CliError> {
    let resolved = config.resolve()?;
    let run = &config.run;
    let schedule = schedule_for(&resolved, run.n_pulses)?;
    let warmup = resolved.demux.n_slots as u64;

    let pieces = shards(run.n_pulses, run.shard_pulses)
        .into_par_iter()
        .map(|range| {
            let replay = range.start.saturating_sub(warmup)..range.end;
            let stream = generate_range(&resolved.source, &resolved.clock, replay, run.seed)?;
            let demux = run_simulation_range(
                &resolved.demux,
                &resolved.clock,
                &stream,
                &schedule,
                range.clone(),
                run.seed,
            )?;
            let own: Vec<PhotonEvent> = stream
                .into_iter()
                .filter(|p| p.pulse_index >= range.start)
                .collect();
            Ok((own, demux))
        })
        .collect::<Result<Vec<_>, loopdemux_core::Error>>()?;

    let mut sim = Simulation {
        source: Vec::new(),
        channels: vec![Vec::new(); resolved.demux.n_slots],
        stats: DemuxStats::default(),
        schedule,
    };
    for (source, demux) in pieces {
        sim.source.extend(source);
        for (merged, part) in sim.channels.iter_mut().zip(demux.channels) {
            merged.extend(part);
        }
        let s = demux.stats;
        sim.stats.entered += s.entered;
        sim.stats.released += s.released;
        sim.stats.parasitic += s.parasitic;
        sim.stats.clipped += s.clipped;
        sim.stats.remaining = s.remaining;
    }
    Ok(sim)
}

/// Clicks of one detector: photon clicks and dark clicks, then dead time.
fn measure<E: Detectable>(
    events: &[E],
    detector: &DetectorModel,
    detector_id: u32,
    resolved: &Resolved,
    n_pulses: u64,
    seed: u64,
) -> TimeTagStream {
    let mut clicks = candidate_clicks(events, 0.0, detector, detector_id, seed);
    clicks.extend(dark_counts(detector, &resolved.clock, 0..n_pulses, detector_id, seed));
    let tags = apply_dead_time(clicks, detector.dead_time_ns);
    TimeTagStream::new(detector_id, tags).expect("dead time leaves strictly increasing tags")
}

fn splitter_measurement(
    a: &[OutputEvent],
    b: &[OutputEvent],
    bs: &BeamsplitterModel,
    splitter_id: u32,
    resolved: &Resolved,
    n_pulses: u64,
    seed: u64,
) -> [TimeTagStream; 2] {
    let source = resolved.source;
    let overlap = |x: &PhotonEvent, y: &PhotonEvent| source.overlap(x.mode_id, y.mode_id);
    let (port0, port1) = route_through_splitter(a, b, bs, overlap, splitter_id, seed);
    let id = SPLITTER_DETECTOR_BASE + 2 * splitter_id;
    [
        measure(&port0, &resolved.detector, id, resolved, n_pulses, seed),
        measure(&port1, &resolved.detector, id + 1, resolved, n_pulses, seed),
    ]
}

/// One detector measurement producing the streams written to its files.
type Job<'a> = Box<dyn Fn() -> Vec<TimeTagStream> + Sync + 'a>;

/// Files written by `simulate`, in a fixed order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifacts {
    pub channel_tags: Vec<String>,
    pub channel_events: Vec<String>,
    pub source_hbt: [String; 2],
    pub channel_hbt: Vec<[String; 2]>,
    pub hom: Vec<([usize; 2], [String; 2])>,
    pub schedule: String,
}

impl Artifacts {
    pub fn for_config(config: &RunConfig) -> Self {
        let n = config.demux.n_slots;
        Self {
            channel_tags: (1..=n).map(channel_file).collect(),
            channel_events: (1..=n).map(events_file).collect(),
            source_hbt: hbt_files("source"),
            channel_hbt: (1..=n).map(|k| hbt_files(&channel_label(k))).collect(),
            hom: config.run.hom_pairs.iter().map(|&p| (p, hom_files(p))).collect(),
            schedule: "schedule.csv".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config: RunConfig,
    pub brightness: f64,
    pub single_photon_probability: f64,
    pub two_photon_probability: f64,
    pub pulse_period_ns: f64,
    pub firing_period_ns: f64,
    pub duration_ns: f64,
    pub n_firings: usize,
    pub duty: Ratio,
    pub channel_transmission: Vec<f64>,
    pub demux_stats: DemuxStats,
    pub source_photons: u64,
    pub artifacts: Artifacts,
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, CliError> {
    let path = dir.join(name);
    File::create(&path).map(BufWriter::new).map_err(io_error(path))
}

fn write_with<F>(dir: &Path, name: &str, body: F) -> Result<(), CliError>
where
    F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
{
    let path = dir.join(name);
    let mut out = create(dir, name)?;
    body(&mut out).and_then(|_| out.flush()).map_err(io_error(path))
}

/// Runs the simulator and every detector measurement, writing all outputs
/// to `config.run.output_dir`.
pub fn run_simulate(config: &RunConfig) -> Result<Manifest, CliError> {
    let resolved = &config.resolve()?;
    let sim = simulate(config)?;
    let run = &config.run;
    let dir = run.output_dir.as_path();
    fs::create_dir_all(dir).map_err(io_error(dir))?;
    let artifacts = Artifacts::for_config(config);
    let n_pulses = run.n_pulses;
    let seed = run.seed;
    let balanced = &BeamsplitterModel::balanced();

    // every measurement is an independent virtual experiment on the same photons
    let source_events: &Vec<OutputEvent> = &sim.source.iter().map(|&p| OutputEvent::from_source(p)).collect();
    let mut jobs: Vec<(Vec<String>, Job<'_>)> = Vec::new();
    for (k, events) in sim.channels.iter().enumerate() {
        let channel = k + 1;
        jobs.push((
            vec![artifacts.channel_tags[k].clone()],
            Box::new(move || {
                vec![measure(events, &resolved.detector, channel as u32, resolved, n_pulses, seed)]
            }),
        ));
        jobs.push((
            artifacts.channel_hbt[k].to_vec(),
            Box::new(move || {
                splitter_measurement(events, &[], balanced, channel_splitter(channel), resolved, n_pulses, seed)
                    .to_vec()
            }),
        ));
    }
    {
        jobs.push((
            artifacts.source_hbt.to_vec(),
            Box::new(move || {
                splitter_measurement(source_events, &[], balanced, SOURCE_SPLITTER, resolved, n_pulses, seed)
                    .to_vec()
            }),
        ));
        for (pair, files) in &artifacts.hom {
            let [i, j] = *pair;
            let (a, b) = (&sim.channels[i - 1], &sim.channels[j - 1]);
            jobs.push((
                files.to_vec(),
                Box::new(move || {
                    splitter_measurement(a, b, &resolved.beamsplitter, pair_splitter([i, j]), resolved, n_pulses, seed)
                        .to_vec()
                }),
            ));
        }
    }

    jobs.par_iter()
        .map(|(names, job)| {
            for (name, stream) in names.iter().zip(job()) {
                write_with(dir, name, |out| write_time_tags(out, &stream))?;
            }
            Ok(())
        })
        .collect::<Result<Vec<()>, CliError>>()?;

    for (k, events) in sim.channels.iter().enumerate() {
        write_with(dir, &artifacts.channel_events[k], |out| write_events(out, events))?;
    }
    write_with(dir, &artifacts.schedule, |out| write_schedule(out, &sim.schedule))?;

    let probabilities = resolved.source.emission_probabilities()?;
    let period = resolved.clock.pulse_period_ns();
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: config.clone(),
        brightness: resolved.source.brightness,
        single_photon_probability: probabilities.single,
        two_photon_probability: probabilities.double,
        pulse_period_ns: period,
        firing_period_ns: period * f64::from(resolved.demux.switch_period_cycles),
        duration_ns: n_pulses as f64 * period,
        n_firings: sim.schedule.firings.len(),
        duty: duty(resolved),
        channel_transmission: (1..=resolved.demux.n_slots)
            .map(|k| channel_transmission(&resolved.demux, k))
            .collect::<Result<_, _>>()?,
        demux_stats: sim.stats,
        source_photons: sim.source.len() as u64,
        artifacts,
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_with(dir, MANIFEST, |out| writeln!(out, "{text}"))?;
    Ok(manifest)
}

fn duty(resolved: &Resolved) -> Ratio {
    Ratio {
        num: resolved.demux.n_slots as u64,
        den: u64::from(resolved.demux.switch_period_cycles),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Auto,
    Hom,
    Rates,
    All,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AutoResult {
    pub label: String,
    pub central: u64,
    pub side_mean: f64,
    pub g2: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HomResult {
    pub pair: Option<[usize; 2]>,
    pub central: u64,
    pub side_mean: f64,
    /// A0 / <Ai>.
    pub a0_ratio: f64,
    pub hom_raw: f64,
    /// A0 / (<Ai> (R^2 + T^2)), the input to the corrected estimator.
    pub normalized_ratio: f64,
    pub hom_corrected: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OrderRow {
    pub order: u32,
    pub rate_hz: f64,
    pub mean_counts: f64,
    pub total_counts: f64,
    pub used: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RatesResult {
    pub orders: Vec<OrderRow>,
    /// Per-firing detection probability of one channel, from the fit.
    pub q_per_firing: f64,
    pub p: f64,
    pub p_predicted: f64,
    pub fit_residual_norm: f64,
    pub e_raw: f64,
    pub e_corrected: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub warnings: Vec<String>,
    /// Purity used to correct the interference visibilities.
    pub g2: f64,
    pub auto: Vec<AutoResult>,
    pub hom: Vec<HomResult>,
    pub hom_pooled: Option<HomResult>,
    pub rates: Option<RatesResult>,
}

struct Inputs<'a> {
    dir: &'a Path,
}

impl Inputs<'_> {
    fn require<'n>(&self, names: impl IntoIterator<Item = &'n String>) -> Result<(), CliError> {
        let missing: Vec<PathBuf> = names
            .into_iter()
            .map(|n| self.dir.join(n))
            .filter(|p| !p.is_file())
            .collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(CliError::MissingInputs(missing))
        }
    }

    fn tags(&self, name: &str, id: u32) -> Result<TimeTagStream, CliError> {
        let path = self.dir.join(name);
        let file = File::open(&path).map_err(io_error(&path))?;
        read_time_tags(BufReader::new(file), id).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

pub fn load_manifest(dir: &Path) -> Result<Manifest, CliError> {
    let path = dir.join(MANIFEST);
    if !path.is_file() {
        return Err(CliError::MissingInputs(vec![path]));
    }
    let text = fs::read_to_string(&path).map_err(io_error(&path))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

struct Analyzer<'a> {
    config: &'a RunConfig,
    resolved: Resolved,
    manifest: &'a Manifest,
    inputs: Inputs<'a>,
    out_dir: &'a Path,
    summary: Summary,
}

impl Analyzer<'_> {
    fn histogram(&self, a: &TimeTagStream, b: &TimeTagStream, period_ns: f64) -> Result<CorrelationHistogram, CliError> {
        let n_side = self.config.analysis.n_side_peaks as f64;
        let max_delay = (n_side + 0.5) * period_ns;
        Ok(correlate(a, b, self.config.analysis.bin_width_ns, max_delay, period_ns)?)
    }

    fn windows(&self) -> PeakWindows {
        PeakWindows {
            halfwidth_ns: self.config.halfwidth_ns(&self.resolved.clock),
            n_side_peaks: self.config.analysis.n_side_peaks,
            excluded_orders: Vec::new(),
        }
    }

    /// Peak areas, or zeros plus a warning when the histogram has no usable peaks.
    fn areas(&mut self, hist: &CorrelationHistogram, label: &str) -> Result<PeakAreas, CliError> {
        use loopdemux_core::Error;
        match loopdemux_core::analysis::peak_areas(hist, &self.windows()) {
            Ok(a) => {
                if a.side_mean == 0.0 {
                    self.summary.warnings.push(format!("{label}: no side-peak coincidences"));
                }
                Ok(a)
            }
            Err(e @ Error::NoSidePeaks) => {
                self.summary.warnings.push(format!("{label}: {e}"));
                Ok(PeakAreas::new(0, Vec::new()))
            }
            Err(e) => Err(e.into()),
        }
    }

    fn write_hist(&self, name: &str, hist: &CorrelationHistogram) -> Result<(), CliError> {
        write_with(self.out_dir, name, |out| write_histogram(out, hist))
    }

    fn auto(&mut self) -> Result<(), CliError> {
        let artifacts = &self.manifest.artifacts;
        let mut sets = vec![("source".to_string(), artifacts.source_hbt.clone(), self.manifest.pulse_period_ns)];
        for (k, files) in artifacts.channel_hbt.iter().enumerate() {
            sets.push((channel_label(k + 1), files.clone(), self.manifest.firing_period_ns));
        }
        self.inputs.require(sets.iter().flat_map(|s| s.1.iter()))?;
        for (label, files, period) in sets {
            let a = self.inputs.tags(&files[0], 0)?;
            let b = self.inputs.tags(&files[1], 1)?;
            let hist = self.histogram(&a, &b, period)?;
            self.write_hist(&format!("hist_auto_{label}.csv"), &hist)?;
            let areas = self.areas(&hist, &label)?;
            let g2 = g2_zero(&areas).unwrap_or(0.0);
            self.summary.auto.push(AutoResult {
                label,
                central: areas.central,
                side_mean: areas.side_mean,
                g2,
            });
        }
        self.summary.g2 = self.summary.auto[0].g2;
        Ok(())
    }

    fn hom_row(&self, pair: Option<[usize; 2]>, areas: &PeakAreas) -> HomResult {
        let bs = &self.resolved.beamsplitter;
        if areas.side_mean == 0.0 {
            return HomResult { pair, central: areas.central, ..HomResult::default() };
        }
        let a0_ratio = areas.ratio().expect("side mean is positive");
        let normalized = distinguishable_normalized_ratio(areas, bs).expect("validated splitter");
        HomResult {
            pair,
            central: areas.central,
            side_mean: areas.side_mean,
            a0_ratio,
            hom_raw: hom_uncorrected(areas).expect("side mean is positive"),
            normalized_ratio: normalized,
            hom_corrected: hom_corrected(normalized, self.summary.g2, bs).expect("validated splitter"),
        }
    }

    fn hom(&mut self) -> Result<(), CliError> {
        let hom = self.manifest.artifacts.hom.clone();
        self.inputs.require(hom.iter().flat_map(|h| h.1.iter()))?;
        if self.summary.auto.is_empty() {
            let files = self.manifest.artifacts.source_hbt.clone();
            if self.inputs.require(&files).is_ok() {
                let a = self.inputs.tags(&files[0], 0)?;
                let b = self.inputs.tags(&files[1], 1)?;
                let hist = self.histogram(&a, &b, self.manifest.pulse_period_ns)?;
                let areas = self.areas(&hist, "source")?;
                self.summary.g2 = g2_zero(&areas).unwrap_or(0.0);
            } else {
                self.summary
                    .warnings
                    .push("source purity streams absent; correcting with g2 = 0".into());
            }
        }
        let mut all = Vec::new();
        for (pair, files) in hom {
            let a = self.inputs.tags(&files[0], 0)?;
            let b = self.inputs.tags(&files[1], 1)?;
            let hist = self.histogram(&a, &b, self.manifest.firing_period_ns)?;
            self.write_hist(&format!("hist_hom_{}{}.csv", pair[0], pair[1]), &hist)?;
            let areas = self.areas(&hist, &format!("pair {pair:?}"))?;
            self.summary.hom.push(self.hom_row(Some(pair), &areas));
            all.push(areas);
        }
        if !all.is_empty() {
            let pooled = PeakAreas::pooled(all.iter().filter(|a| !a.side.is_empty()));
            self.summary.hom_pooled = Some(self.hom_row(None, &pooled));
        }
        Ok(())
    }

    fn rates(&mut self) -> Result<(), CliError> {
        let files = self.manifest.artifacts.channel_tags.clone();
        self.inputs.require(&files)?;
        let streams = files
            .iter()
            .enumerate()
            .map(|(k, f)| self.inputs.tags(f, k as u32 + 1))
            .collect::<Result<Vec<_>, _>>()?;
        let refs: Vec<&TimeTagStream> = streams.iter().collect();
        let counts = CoincidenceCounts::from_streams(
            &refs,
            &vec![0.0; refs.len()],
            self.manifest.pulse_period_ns,
            self.manifest.duration_ns,
        )?;
        let n = refs.len() as u64;
        let min_counts = self.config.analysis.min_coincidence_counts as f64;
        let mut rows = Vec::new();
        for rate in counts.order_rates() {
            let total = rate.counts * binomial(n, u64::from(rate.order)) as f64;
            let used = total >= min_counts && total > 0.0;
            if !used {
                self.summary.warnings.push(format!(
                    "order {} coincidences: {total} counts below {min_counts}, left out of the fit",
                    rate.order
                ));
            }
            rows.push(OrderRow {
                order: rate.order,
                rate_hz: rate.rate_hz,
                mean_counts: rate.counts,
                total_counts: total,
                used,
            });
        }
        let (orders, rates): (Vec<u32>, Vec<f64>) =
            rows.iter().filter(|r| r.used).map(|r| (r.order, r.rate_hz)).unzip();
        let resolved = &self.resolved;
        let duty = duty(resolved);
        let eta = resolved.detector.efficiency;
        let b = resolved.source.brightness;
        let mean_transmission =
            self.manifest.channel_transmission.iter().sum::<f64>() / self.manifest.channel_transmission.len() as f64;
        let mut result = RatesResult {
            orders: rows,
            p_predicted: b * eta * duty.value() * mean_transmission,
            ..RatesResult::default()
        };
        match fit_exponential(&orders, &rates) {
            Ok(fit) => {
                result.q_per_firing = fit.p;
                result.p = fit.p * duty.value();
                result.fit_residual_norm = fit.residual_norm;
                match channel_efficiency(result.p, b, eta, duty) {
                    Ok(report) => {
                        result.e_raw = report.e_raw;
                        result.e_corrected = report.e_corrected;
                    }
                    Err(e) => self.summary.warnings.push(format!("efficiency: {e}")),
                }
            }
            Err(e) => self.summary.warnings.push(format!("coincidence fit: {e}")),
        }
        self.summary.rates = Some(result);
        Ok(())
    }
}

fn binomial(n: u64, k: u64) -> u64 {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

/// Reads a `simulate` output directory and writes `summary.json` plus
/// histogram CSVs to `out_dir`.
pub fn run_analyze(input_dir: &Path, out_dir: &Path, mode: Mode) -> Result<Summary, CliError> {
    let manifest = load_manifest(input_dir)?;
    let config = manifest.config.clone();
    let resolved = config.resolve()?;
    fs::create_dir_all(out_dir).map_err(io_error(out_dir))?;
    let mut analyzer = Analyzer {
        config: &config,
        resolved,
        manifest: &manifest,
        inputs: Inputs { dir: input_dir },
        out_dir,
        summary: Summary::default(),
    };
    if matches!(mode, Mode::Auto | Mode::All) {
        analyzer.auto()?;
    }
    if matches!(mode, Mode::Hom | Mode::All) {
        analyzer.hom()?;
    }
    if matches!(mode, Mode::Rates | Mode::All) {
        analyzer.rates()?;
    }
    let summary = analyzer.summary;
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    write_with(out_dir, SUMMARY, |out| writeln!(out, "{text}"))?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn firing_counts() {
        assert_eq!(firing_count(5, 6, 6), 1);
        assert_eq!(firing_count(5, 6, 5), 0);
        assert_eq!(firing_count(5, 6, 12), 2);
        assert_eq!(firing_count(5, 6, 17), 2);
        assert_eq!(firing_count(5, 6, 18), 3);
    }

    #[test]
    fn shards_cover_the_run() {
        let s = shards(10, 3);
        assert_eq!(s, vec![0..3, 3..6, 6..9, 9..10]);
        assert_eq!(shards(4, 100), vec![0..4]);
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(4, 2), 6);
        assert_eq!(binomial(4, 4), 1);
        assert_eq!(binomial(4, 1), 4);
    }
}
