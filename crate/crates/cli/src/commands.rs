use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use loopdemux_core::clock_source::ClockConfig;
use loopdemux_core::control_sequencer::{build_schedule, explore_variant, validate_schedule, Ratio};
use loopdemux_core::io::write_schedule;

use crate::config::RunConfig;
use crate::error::{io_error, CliError};
use crate::pipeline::{run_analyze, run_simulate, Mode};

#[derive(Debug, Parser)]
#[command(name = "loopdemux", version, about = "Loop demultiplexer simulator and time-tag analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate source, loop and detectors; write time tags and a manifest.
    Simulate(SimulateArgs),
    /// Estimate purity, interference visibility and efficiency from a run.
    Analyze(AnalyzeArgs),
    /// Build and validate the Pockels-cell gating schedule.
    Schedule(ScheduleArgs),
    /// Channel count and photon budget for a repetition and switching rate.
    Explore(ExploreArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Paper,
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Built-in configuration used instead of a file.
    #[arg(long, value_enum, conflicts_with = "config")]
    pub preset: Option<Preset>,
}

impl ConfigArgs {
    pub fn load(&self) -> Result<RunConfig, CliError> {
        match (&self.config, self.preset) {
            (Some(path), _) => RunConfig::load(path),
            (None, Some(Preset::Paper)) => Ok(RunConfig::paper()),
            (None, None) => Ok(RunConfig::default()),
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub pulses: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Directory written by `simulate`.
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "all")]
    pub mode: Mode,
    /// Where to write the summary and histograms; defaults to the input directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScheduleArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Switching period in clock cycles; overrides the configuration.
    #[arg(long)]
    pub period: Option<u32>,
    #[arg(long, default_value_t = 10)]
    pub firings: usize,
    #[arg(long)]
    pub min_switch_interval_ns: Option<f64>,
    /// Output directory for schedule.csv.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExploreArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long)]
    pub rep_rate_hz: Option<f64>,
    #[arg(long)]
    pub switch_rate_hz: Option<f64>,
    /// Double the repetition rate with counter-propagating beams.
    #[arg(long)]
    pub doubled: bool,
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(args) => simulate(args, out),
        Command::Analyze(args) => analyze(args, out),
        Command::Schedule(args) => schedule(args, out),
        Command::Explore(args) => explore(args, out),
    }
}

fn print(out: &mut dyn Write, text: std::fmt::Arguments) -> Result<(), CliError> {
    out.write_fmt(text).map_err(io_error("<stdout>"))
}

fn simulate(args: SimulateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let mut config = args.config.load()?;
    if let Some(seed) = args.seed {
        config.run.seed = seed;
    }
    if let Some(pulses) = args.pulses {
        config.run.n_pulses = pulses;
    }
    if let Some(dir) = args.out {
        config.run.output_dir = dir;
    }
    let manifest = run_simulate(&config)?;
    let s = manifest.demux_stats;
    print(
        out,
        format_args!(
            "simulated {} pulses (seed {}) into {}\n\
             source photons {}, released {}, parasitic {}, clipped {}\n",
            config.run.n_pulses,
            config.run.seed,
            config.run.output_dir.display(),
            manifest.source_photons,
            s.released,
            s.parasitic,
            s.clipped
        ),
    )
}

fn analyze(args: AnalyzeArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let out_dir = args.out.unwrap_or_else(|| args.input.clone());
    let summary = run_analyze(&args.input, &out_dir, args.mode)?;
    for warning in &summary.warnings {
        eprintln!("warning: {warning}");
    }
    for a in &summary.auto {
        print(out, format_args!("g2[{}] = {:.4}\n", a.label, a.g2))?;
    }
    for h in &summary.hom {
        if let Some([i, j]) = h.pair {
            print(
                out,
                format_args!("HOM[{i},{j}] raw {:.4} corrected {:.4}\n", h.hom_raw, h.hom_corrected),
            )?;
        }
    }
    if let Some(h) = &summary.hom_pooled {
        print(out, format_args!("HOM pooled corrected {:.4}\n", h.hom_corrected))?;
    }
    if let Some(r) = &summary.rates {
        print(
            out,
            format_args!(
                "p = {:.5} (predicted {:.5}), e_raw = {:.4}, e = {:.4}\n",
                r.p, r.p_predicted, r.e_raw, r.e_corrected
            ),
        )?;
    }
    print(out, format_args!("summary written to {}\n", out_dir.join(crate::pipeline::SUMMARY).display()))
}

fn schedule(args: ScheduleArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let mut config = args.config.load()?;
    if let Some(period) = args.period {
        config.demux.switch_period_cycles = period;
    }
    if let Some(interval) = args.min_switch_interval_ns {
        config.driver.min_switch_interval_ns = interval;
        // a longer interval also lowers the sustainable switching rate
        if interval > 0.0 {
            let ceiling = 1e9 / interval;
            config.driver.max_continuous_rate_hz = config.driver.max_continuous_rate_hz.min(ceiling);
        }
    }
    let resolved = config.resolve()?;
    let period = resolved.demux.switch_period_cycles;
    let schedule = build_schedule(
        &resolved.clock,
        &resolved.constraints,
        period,
        args.firings,
        &resolved.timing,
    )?;
    let report = validate_schedule(&schedule, &resolved.clock, &resolved.constraints);
    let dir = args.out.unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).map_err(io_error(&dir))?;
    let path = dir.join("schedule.csv");
    let file = std::fs::File::create(&path).map_err(io_error(&path))?;
    write_schedule(std::io::BufWriter::new(file), &schedule).map_err(io_error(&path))?;

    let firing_interval = f64::from(period) * resolved.clock.pulse_period_ns();
    let duty = Ratio {
        num: resolved.demux.n_slots as u64,
        den: u64::from(period),
    };
    print(
        out,
        format_args!(
            "period {period} cycles = {firing_interval:.3} ns, duty {duty}, {} firings -> {}\n",
            schedule.firings.len(),
            path.display()
        ),
    )?;
    if report.is_valid() {
        print(out, format_args!("schedule valid\n"))
    } else {
        for v in &report.violations {
            print(out, format_args!("firing {}: {:?}\n", v.firing_index, v.kind))?;
        }
        Err(CliError::Infeasible(format!("{} schedule violations", report.violations.len())))
    }
}

fn explore(args: ExploreArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let config = args.config.load()?;
    let resolved = config.resolve()?;
    let clock = match args.rep_rate_hz {
        Some(rate) => ClockConfig::new(rate)?,
        None => resolved.clock,
    };
    let mut constraints = resolved.constraints;
    if let Some(rate) = args.switch_rate_hz {
        constraints.max_continuous_rate_hz = rate;
    }
    let v = explore_variant(&resolved.demux, &clock, &constraints, args.doubled)?;
    let rows: [(&str, String); 10] = [
        ("repetition rate [MHz]", format!("{:.3}", v.rep_rate_hz / 1e6)),
        ("pulse period [ns]", format!("{:.3}", v.pulse_period_ns)),
        ("switching rate [MHz]", format!("{:.3}", constraints.max_continuous_rate_hz / 1e6)),
        ("N_min", v.min_channels.to_string()),
        ("output channels", v.n_channels.to_string()),
        ("switch period [cycles]", v.switch_period_cycles.to_string()),
        ("firing interval [ns]", format!("{:.3}", v.firing_interval_ns)),
        ("duty", v.duty.to_string()),
        ("lost", v.lost.to_string()),
        (
            "feasible",
            format!(
                "{}{}",
                v.meets_min_switch_interval,
                if v.needs_second_splitter { " (second splitter)" } else { "" }
            ),
        ),
    ];
    for (key, value) in rows {
        print(out, format_args!("{key:<24}{value}\n"))?;
    }
    Ok(())
}
