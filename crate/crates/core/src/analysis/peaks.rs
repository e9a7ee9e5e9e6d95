use serde::{Deserialize, Serialize};

use super::histogram::CorrelationHistogram;
use crate::error::{check_positive, Error, Result};

/// Integration windows used to read peak areas off a histogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakWindows {
    pub halfwidth_ns: f64,
    /// Side peaks requested on each side of zero delay.
    pub n_side_peaks: usize,
    /// Peak orders (multiples of the period) left out of the side mean.
    pub excluded_orders: Vec<i64>,
}

impl PeakWindows {
    /// Quarter-period windows over ten side peaks per side.
    pub fn for_period(period_ns: f64) -> Self {
        Self {
            halfwidth_ns: period_ns / 4.0,
            n_side_peaks: 10,
            excluded_orders: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakAreas {
    pub central: u64,
    pub side: Vec<u64>,
    pub side_mean: f64,
}

impl PeakAreas {
    pub fn new(central: u64, side: Vec<u64>) -> Self {
        let side_mean = if side.is_empty() {
            0.0
        } else {
            side.iter().sum::<u64>() as f64 / side.len() as f64
        };
        Self {
            central,
            side,
            side_mean,
        }
    }

    /// Pools areas from several measurements into one estimate.
    pub fn pooled<'a>(areas: impl IntoIterator<Item = &'a PeakAreas>) -> Self {
        let mut central = 0;
        let mut side = Vec::new();
        for a in areas {
            central += a.central;
            side.push(a.side.iter().sum::<u64>() as f64 / a.side.len().max(1) as f64);
        }
        let side_mean = side.iter().sum::<f64>();
        Self {
            central,
            side: Vec::new(),
            side_mean,
        }
    }

    /// A0 / <Ai>.
    pub fn ratio(&self) -> Result<f64> {
        if self.side_mean > 0.0 {
            Ok(self.central as f64 / self.side_mean)
        } else {
            Err(Error::UndefinedEstimate("mean side-peak area is zero"))
        }
    }
}

/// Integrates the central peak and the side peaks at multiples of the
/// histogram's period. A bin belongs to a window when its centre lies within
/// the half-width of the peak position. Side windows that would cross the
/// histogram edge are dropped.
pub fn peak_areas(hist: &CorrelationHistogram, windows: &PeakWindows) -> Result<PeakAreas> {
    check_positive("halfwidth_ns", windows.halfwidth_ns)?;
    let period = hist.period_ns();
    if period <= 2.0 * windows.halfwidth_ns {
        return Err(Error::WindowOverlap {
            period_ns: period,
            halfwidth_ns: windows.halfwidth_ns,
        });
    }
    let width = hist.bin_width_ns();
    let half_bins = hist.half_bins();
    let counts = hist.counts();
    let area = |centre_ns: f64| -> u64 {
        let lo = ((centre_ns - windows.halfwidth_ns) / width).ceil() as i64;
        let hi = ((centre_ns + windows.halfwidth_ns) / width).floor() as i64;
        (lo.max(-half_bins)..=hi.min(half_bins))
            .map(|j| counts[(j + half_bins) as usize])
            .sum()
    };

    let reach = hist.max_delay_ns();
    let mut side = Vec::new();
    for order in 1..=windows.n_side_peaks as i64 {
        for signed in [-order, order] {
            if windows.excluded_orders.contains(&signed) {
                continue;
            }
            let centre = signed as f64 * period;
            if centre.abs() + windows.halfwidth_ns > reach {
                continue;
            }
            side.push(area(centre));
        }
    }
    if side.is_empty() {
        return Err(Error::NoSidePeaks);
    }
    Ok(PeakAreas::new(area(0.0), side))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Histogram with `value` counts injected at the centre bin of peak `k`
    /// for each (k, value).
    fn synthetic(period: f64, injections: &[(i64, u64)], noise: u64) -> CorrelationHistogram {
        let width = 0.5;
        let half = (12.0 * period / width).round() as usize;
        let mut counts = vec![noise; 2 * half + 1];
        for &(k, value) in injections {
            let index = (k as f64 * period / width).round() as i64 + half as i64;
            counts[index as usize] += value;
        }
        CorrelationHistogram::from_counts(width, counts, period).unwrap()
    }

    #[test]
    fn construct_then_read_recovers_injections() {
        let injections: Vec<(i64, u64)> = (-10i64..=10).map(|k| (k, 100 + k.unsigned_abs() * 7)).collect();
        let hist = synthetic(72.5, &injections, 0);
        let areas = peak_areas(&hist, &PeakWindows::for_period(72.5)).unwrap();
        assert_eq!(areas.central, 100);
        let mut expected: Vec<u64> = (1..=10u64).flat_map(|k| [100 + k * 7, 100 + k * 7]).collect();
        let mut got = areas.side.clone();
        expected.sort();
        got.sort();
        assert_eq!(got, expected);
    }

    #[test]
    fn zero_central_window() {
        let injections: Vec<(i64, u64)> = (1..=10).flat_map(|k| [(k, 50), (-k, 50)]).collect();
        let hist = synthetic(72.5, &injections, 0);
        let areas = peak_areas(&hist, &PeakWindows::for_period(72.5)).unwrap();
        assert_eq!(areas.central, 0);
        assert_eq!(areas.side_mean, 50.0);
    }

    #[test]
    fn overlapping_windows_rejected() {
        let hist = synthetic(10.0, &[], 1);
        let windows = PeakWindows {
            halfwidth_ns: 5.0,
            ..PeakWindows::for_period(10.0)
        };
        assert!(matches!(
            peak_areas(&hist, &windows),
            Err(Error::WindowOverlap { .. })
        ));
    }

    #[test]
    fn excluded_orders_and_edges() {
        let hist = synthetic(10.0, &[], 1);
        let mut windows = PeakWindows::for_period(10.0);
        windows.n_side_peaks = 20;
        let areas = peak_areas(&hist, &windows).unwrap();
        // 12 periods of range, last full window at order 11
        assert_eq!(areas.side.len(), 22);
        windows.excluded_orders = vec![-1, 1];
        assert_eq!(peak_areas(&hist, &windows).unwrap().side.len(), 20);
    }

    #[test]
    fn no_side_peaks_in_short_histogram() {
        let hist = CorrelationHistogram::from_counts(1.0, vec![0; 11], 100.0).unwrap();
        assert!(matches!(
            peak_areas(&hist, &PeakWindows::for_period(100.0)),
            Err(Error::NoSidePeaks)
        ));
    }
}
