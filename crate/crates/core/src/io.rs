//! Plain-text formats exchanged between the simulator and the analysis stage.
//!
//! Time tags are written in nanoseconds with exactly three decimals so that the
//! picosecond integers round-trip without floating-point error.

use std::io::{BufRead, Write};

use crate::analysis::CorrelationHistogram;
use crate::control_sequencer::TtlSchedule;
use crate::detection::TimeTagStream;
use crate::error::{Error, Result};
use crate::loop_demux::OutputEvent;

const PS_PER_NS: i64 = 1000;

pub const TIME_TAG_HEADER: &str = "time_ns";
pub const HISTOGRAM_HEADER: &str = "delay_ns,counts";
pub const SCHEDULE_HEADER: &str = "cycle_index,key1_on_ns,key1_off_ns,key2_on_ns,key2_off_ns,window_start_ns,window_end_ns";
pub const EVENT_HEADER: &str = "channel,cycle_index,exit_time_ns,pulse_index,ordinal,mode_id,polarization,survival_prob,parasitic";

/// Formats integer picoseconds as nanoseconds with three decimals.
pub fn format_ps(ps: i64) -> String {
    let sign = if ps < 0 { "-" } else { "" };
    let magnitude = ps.unsigned_abs();
    format!("{sign}{}.{:03}", magnitude / PS_PER_NS as u64, magnitude % PS_PER_NS as u64)
}

/// Parses a decimal nanosecond value into picoseconds, rounding any digits
/// beyond the third decimal.
pub fn parse_ps(text: &str) -> Option<i64> {
    let text = text.trim();
    let (negative, body) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text),
    };
    let (whole, fraction) = body.split_once('.').unwrap_or((body, ""));
    if whole.is_empty() && fraction.is_empty() {
        return None;
    }
    let digits_ok = |s: &str| s.bytes().all(|b| b.is_ascii_digit());
    if !digits_ok(whole) || !digits_ok(fraction) {
        return None;
    }
    let whole: i64 = if whole.is_empty() { 0 } else { whole.parse().ok()? };
    let mut frac_ps = 0i64;
    for (i, b) in fraction.bytes().enumerate() {
        let digit = i64::from(b - b'0');
        match i {
            0 => frac_ps += digit * 100,
            1 => frac_ps += digit * 10,
            2 => frac_ps += digit,
            3 if digit >= 5 => frac_ps += 1,
            _ => {}
        }
    }
    let ps = whole.checked_mul(PS_PER_NS)?.checked_add(frac_ps)?;
    Some(if negative { -ps } else { ps })
}

pub fn write_time_tags<W: Write>(mut out: W, stream: &TimeTagStream) -> std::io::Result<()> {
    writeln!(out, "{TIME_TAG_HEADER}")?;
    for &t in stream.tags_ps() {
        writeln!(out, "{}", format_ps(t))?;
    }
    Ok(())
}

/// Reads a time-tag file. The header line is optional; blank lines are skipped.
pub fn read_time_tags<R: BufRead>(input: R, channel_id: u32) -> Result<TimeTagStream> {
    let mut tags = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::Parse {
            line: line_no,
            reason: e.to_string(),
        })?;
        let field = line.split(',').next().unwrap_or("").trim();
        if field.is_empty() || (line_no == 1 && field == TIME_TAG_HEADER) {
            continue;
        }
        let ps = parse_ps(field).ok_or_else(|| Error::Parse {
            line: line_no,
            reason: format!("'{field}' is not a time in nanoseconds"),
        })?;
        tags.push(ps);
    }
    TimeTagStream::new(channel_id, tags)
}

pub fn write_histogram<W: Write>(mut out: W, hist: &CorrelationHistogram) -> std::io::Result<()> {
    writeln!(out, "{HISTOGRAM_HEADER}")?;
    for (delay, count) in hist.delays_ns().zip(hist.counts()) {
        writeln!(out, "{delay:.4},{count}")?;
    }
    Ok(())
}

pub fn write_schedule<W: Write>(mut out: W, schedule: &TtlSchedule) -> std::io::Result<()> {
    writeln!(out, "{SCHEDULE_HEADER}")?;
    for f in &schedule.firings {
        let (start, end) = f.window();
        writeln!(
            out,
            "{},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4}",
            f.cycle_index, f.key1_on_ns, f.key1_off_ns, f.key2_on_ns, f.key2_off_ns, start, end
        )?;
    }
    Ok(())
}

pub fn write_events<'a, W: Write>(
    mut out: W,
    events: impl IntoIterator<Item = &'a OutputEvent>,
) -> std::io::Result<()> {
    writeln!(out, "{EVENT_HEADER}")?;
    for e in events {
        let p = &e.photon;
        writeln!(
            out,
            "{},{},{:.4},{},{},{},{:?},{:.6},{}",
            e.channel,
            e.cycle_index,
            e.exit_time_ns,
            p.pulse_index,
            p.ordinal,
            p.mode_id.0,
            p.polarization,
            p.survival_prob(),
            u8::from(e.parasitic)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn picosecond_formatting() {
        assert_eq!(format_ps(0), "0.000");
        assert_eq!(format_ps(12_100), "12.100");
        assert_eq!(format_ps(7), "0.007");
        assert_eq!(format_ps(-1_500), "-1.500");
    }

    #[test]
    fn parsing() {
        assert_eq!(parse_ps("12.1"), Some(12_100));
        assert_eq!(parse_ps("12"), Some(12_000));
        assert_eq!(parse_ps(".5"), Some(500));
        assert_eq!(parse_ps("0.0015"), Some(2));
        assert_eq!(parse_ps("-3.25"), Some(-3_250));
        assert_eq!(parse_ps("abc"), None);
        assert_eq!(parse_ps("1e3"), None);
        assert_eq!(parse_ps(""), None);
    }

    #[test]
    fn time_tag_round_trip() {
        let stream = TimeTagStream::new(3, vec![0, 1, 999, 1_000, 123_456_789]).unwrap();
        let mut buf = Vec::new();
        write_time_tags(&mut buf, &stream).unwrap();
        let back = read_time_tags(buf.as_slice(), 3).unwrap();
        assert_eq!(back, stream);
    }

    #[test]
    fn bad_line_is_reported() {
        let text = "time_ns\n1.000\nnope\n";
        match read_time_tags(text.as_bytes(), 0) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unsorted_file_rejected() {
        assert!(matches!(
            read_time_tags("2.0\n1.0\n".as_bytes(), 0),
            Err(Error::UnsortedTags { .. })
        ));
    }
}
