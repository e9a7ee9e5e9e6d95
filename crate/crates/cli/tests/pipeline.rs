use std::fs;

use loopdemux_cli::config::RunConfig;
use loopdemux_cli::pipeline::{run_analyze, run_simulate, Mode};
use proptest::prelude::*;

fn ideal(n_pulses: u64, brightness: f64) -> RunConfig {
    let mut c = RunConfig::default();
    c.source.brightness = brightness;
    c.source.g2_zero = 0.0;
    c.run.n_pulses = n_pulses;
    c
}

#[test]
fn rates_on_a_lossless_loop_recover_b_duty_eta() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = ideal(1_000_000, 0.3);
    config.run.output_dir = dir.path().to_path_buf();
    run_simulate(&config).unwrap();
    let summary = run_analyze(dir.path(), dir.path(), Mode::Rates).unwrap();
    let rates = summary.rates.unwrap();
    let q = 0.3 * 0.85;
    let expected = q * 4.0 / 6.0;
    assert!(rates.orders.iter().all(|o| o.used));

    // spread of the unweighted log-slope over orders 1..4 from counting noise
    let weights = [-1.5, -0.5, 0.5, 1.5];
    let variance: f64 = rates
        .orders
        .iter()
        .zip(weights)
        .map(|(o, w)| w * w / o.total_counts)
        .sum::<f64>()
        / 25.0;
    let sigma = variance.sqrt();
    let rel = rates.p / expected - 1.0;
    assert!(rel.abs() < 4.0 * sigma, "p {} vs {expected}: {rel} > 4 x {sigma}", rates.p);
    assert!((rates.p_predicted - expected).abs() < 1e-12);
}

#[test]
fn empty_streams_give_a_zeroed_summary() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = ideal(5_000, 0.0);
    config.run.output_dir = dir.path().to_path_buf();
    run_simulate(&config).unwrap();
    let summary = run_analyze(dir.path(), dir.path(), Mode::All).unwrap();
    assert!(!summary.warnings.is_empty());
    assert_eq!(summary.g2, 0.0);
    assert!(summary.hom.iter().all(|h| h.hom_corrected == 0.0));
    assert_eq!(summary.rates.unwrap().p, 0.0);
    assert!(dir.path().join("summary.json").is_file());
}

#[test]
fn paper_preset_pins_golden_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = RunConfig::paper();
    config.run.n_pulses = 20_000;
    config.run.output_dir = dir.path().to_path_buf();
    run_simulate(&config).unwrap();
    let golden = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    for k in 1..=4 {
        let got = fs::read_to_string(dir.path().join(format!("channel_{k}.csv"))).unwrap();
        let want = fs::read_to_string(golden.join(format!("paper_20k_channel_{k}.csv"))).unwrap();
        assert_eq!(got, want, "channel {k}");
    }
}

#[test]
fn schedule_command_matches_golden_file() {
    use clap::Parser;
    use loopdemux_cli::commands::{run, Cli};
    let dir = tempfile::tempdir().unwrap();
    let cli = Cli::parse_from(["loopdemux", "schedule", "--preset", "paper", "--out", dir.path().to_str().unwrap()]);
    run(cli, &mut Vec::new()).unwrap();
    let golden = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/paper_schedule.csv");
    assert_eq!(
        fs::read_to_string(dir.path().join("schedule.csv")).unwrap(),
        fs::read_to_string(golden).unwrap()
    );
}

#[test]
fn paper_counts_match_expected_detection_probability() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = RunConfig::paper();
    config.run.n_pulses = 2_000_000;
    config.run.output_dir = dir.path().to_path_buf();
    let manifest = run_simulate(&config).unwrap();
    let clicks: usize = (1..=4)
        .map(|k| fs::read_to_string(dir.path().join(format!("channel_{k}.csv"))).unwrap().lines().count() - 1)
        .sum();
    let expected = manifest.brightness * 0.225 * config.run.n_pulses as f64;
    // binomial spread plus a percent for two-photon pulses and idle-cycle leakage
    let tolerance = 4.0 * expected.sqrt() + 0.01 * expected;
    assert!((clicks as f64 - expected).abs() < tolerance, "{clicks} vs {expected}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn config_survives_serialization(
        rep in 1e6f64..1e9,
        brightness in 0.0f64..1.0,
        seed in any::<u64>(),
        pulses in 1u64..1_000_000_000,
        rot in prop::collection::vec(0.0f64..=1.0, 4),
        rate in prop::option::of(1.0f64..1e6),
        first in prop::option::of(0u64..100),
    ) {
        let mut c = RunConfig::default();
        c.clock.rep_rate_hz = rep;
        c.source.brightness = brightness;
        c.source.count_rate_hz = rate;
        c.run.seed = seed;
        c.run.n_pulses = pulses;
        c.demux.pc_on_rotation_efficiency = rot;
        c.driver.first_firing_cycle = first;
        let text = c.to_toml();
        prop_assert_eq!(RunConfig::from_toml(&text).unwrap(), c);
    }
}
