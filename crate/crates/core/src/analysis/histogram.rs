use serde::{Deserialize, Serialize};

use crate::detection::{TimeTagStream, PS_PER_NS};
use crate::error::{check_positive, Error, Result};

/// Coincidence counts binned by delay `t_b - t_a`. Bin `j` is centred on
/// `j * bin_width` and covers `[j w - w/2, j w + w/2)`; bins run from
/// `-half_bins` to `half_bins`, so the count is always odd.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationHistogram {
    bin_width_ps: i64,
    half_bins: i64,
    counts: Vec<u64>,
    /// Expected spacing of the coincidence peaks.
    period_ns: f64,
}

impl CorrelationHistogram {
    pub fn new(bin_width_ns: f64, max_delay_ns: f64, period_ns: f64) -> Result<Self> {
        check_positive("max_delay_ns", max_delay_ns)?;
        let bin_width_ps = bin_width_to_ps(bin_width_ns)?;
        check_positive("period_ns", period_ns)?;
        let max_delay_ps = (max_delay_ns * PS_PER_NS).round() as i64;
        let half_bins = (max_delay_ps + bin_width_ps - 1) / bin_width_ps;
        Ok(Self {
            bin_width_ps,
            half_bins,
            counts: vec![0; (2 * half_bins + 1) as usize],
            period_ns,
        })
    }

    /// Rebuilds a histogram from stored counts (odd length, centred).
    pub fn from_counts(bin_width_ns: f64, counts: Vec<u64>, period_ns: f64) -> Result<Self> {
        let bin_width_ps = bin_width_to_ps(bin_width_ns)?;
        check_positive("period_ns", period_ns)?;
        if counts.len().is_multiple_of(2) {
            return Err(Error::InvalidParameter {
                field: "counts",
                reason: "histogram needs an odd number of bins".into(),
            });
        }
        Ok(Self {
            bin_width_ps,
            half_bins: (counts.len() / 2) as i64,
            counts,
            period_ns,
        })
    }

    pub fn bin_width_ns(&self) -> f64 {
        self.bin_width_ps as f64 / PS_PER_NS
    }

    pub fn period_ns(&self) -> f64 {
        self.period_ns
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn half_bins(&self) -> i64 {
        self.half_bins
    }

    /// Centre delay of every bin.
    pub fn delays_ns(&self) -> impl Iterator<Item = f64> + '_ {
        (-self.half_bins..=self.half_bins).map(|j| (j * self.bin_width_ps) as f64 / PS_PER_NS)
    }

    /// Largest bin-centre delay.
    pub fn max_delay_ns(&self) -> f64 {
        (self.half_bins * self.bin_width_ps) as f64 / PS_PER_NS
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Bin offset of `delay_ps` relative to the centre bin.
    fn bin_of(&self, delay_ps: i64) -> i64 {
        (2 * delay_ps + self.bin_width_ps).div_euclid(2 * self.bin_width_ps)
    }

    fn record(&mut self, delay_ps: i64) -> std::cmp::Ordering {
        let bin = self.bin_of(delay_ps);
        if bin < -self.half_bins {
            std::cmp::Ordering::Less
        } else if bin > self.half_bins {
            std::cmp::Ordering::Greater
        } else {
            self.counts[(bin + self.half_bins) as usize] += 1;
            std::cmp::Ordering::Equal
        }
    }

    /// Bin-wise sum with a histogram of identical geometry.
    pub fn merge(&mut self, other: &Self) -> Result<()> {
        if self.bin_width_ps != other.bin_width_ps || self.half_bins != other.half_bins {
            return Err(Error::HistogramMismatch("bin geometry differs"));
        }
        if self.period_ns != other.period_ns {
            return Err(Error::HistogramMismatch("peak period differs"));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }
}

fn bin_width_to_ps(bin_width_ns: f64) -> Result<i64> {
    check_positive("bin_width_ns", bin_width_ns)?;
    let ps = (bin_width_ns * PS_PER_NS).round() as i64;
    if ps < 1 {
        return Err(Error::InvalidParameter {
            field: "bin_width_ns",
            reason: "below the 1 ps tag resolution".into(),
        });
    }
    Ok(ps)
}

fn fill(hist: &mut CorrelationHistogram, a: &[i64], b: &[i64], skip_self: bool) {
    let mut lo = 0usize;
    for (i, &ta) in a.iter().enumerate() {
        while lo < b.len() && hist.bin_of(b[lo] - ta) < -hist.half_bins {
            lo += 1;
        }
        for (j, &tb) in b.iter().enumerate().skip(lo) {
            if skip_self && i == j {
                continue;
            }
            if hist.record(tb - ta) == std::cmp::Ordering::Greater {
                break;
            }
        }
    }
}

/// Start-stop cross-correlation of two sorted tag streams over delays up to
/// `max_delay_ns` on both sides.
pub fn correlate(
    a: &TimeTagStream,
    b: &TimeTagStream,
    bin_width_ns: f64,
    max_delay_ns: f64,
    period_ns: f64,
) -> Result<CorrelationHistogram> {
    let mut hist = CorrelationHistogram::new(bin_width_ns, max_delay_ns, period_ns)?;
    fill(&mut hist, a.tags_ps(), b.tags_ps(), false);
    Ok(hist)
}

/// Auto-correlation of one stream, excluding each tag's pairing with itself.
pub fn autocorrelate(
    a: &TimeTagStream,
    bin_width_ns: f64,
    max_delay_ns: f64,
    period_ns: f64,
) -> Result<CorrelationHistogram> {
    let mut hist = CorrelationHistogram::new(bin_width_ns, max_delay_ns, period_ns)?;
    fill(&mut hist, a.tags_ps(), a.tags_ps(), true);
    Ok(hist)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream(tags: &[i64]) -> TimeTagStream {
        TimeTagStream::new(0, tags.to_vec()).unwrap()
    }

    #[test]
    fn bins_are_odd_and_centred() {
        let h = CorrelationHistogram::new(0.1, 100.0, 12.1).unwrap();
        assert_eq!(h.counts().len() % 2, 1);
        let centre = h.delays_ns().nth(h.half_bins() as usize).unwrap();
        assert_eq!(centre, 0.0);
        assert!((h.max_delay_ns() - 100.0).abs() < 1e-12);
    }

    #[test]
    fn single_pair_lands_at_its_delay() {
        let h = correlate(&stream(&[1_000]), &stream(&[4_000]), 0.5, 10.0, 12.1).unwrap();
        assert_eq!(h.total(), 1);
        let (index, _) = h.counts().iter().enumerate().find(|(_, &c)| c == 1).unwrap();
        let delay = h.delays_ns().nth(index).unwrap();
        assert!((delay - 3.0).abs() < 1e-12);
    }

    #[test]
    fn empty_stream_gives_empty_histogram() {
        let h = correlate(&stream(&[]), &stream(&[5]), 0.1, 10.0, 12.1).unwrap();
        assert_eq!(h.total(), 0);
    }

    #[test]
    fn autocorrelation_excludes_self_pairs() {
        let h = autocorrelate(&stream(&[0, 10_000]), 1.0, 20.0, 10.0).unwrap();
        assert_eq!(h.total(), 2);
        assert_eq!(h.counts()[h.half_bins() as usize], 0);
    }

    #[test]
    fn merge_requires_same_geometry() {
        let mut a = CorrelationHistogram::new(0.1, 10.0, 12.1).unwrap();
        let b = CorrelationHistogram::new(0.2, 10.0, 12.1).unwrap();
        assert!(a.merge(&b).is_err());
    }

    #[test]
    fn half_bin_edges_belong_to_upper_bin() {
        let mut h = CorrelationHistogram::new(1.0, 5.0, 12.1).unwrap();
        assert_eq!(h.record(500), std::cmp::Ordering::Equal);
        assert_eq!(h.record(-500), std::cmp::Ordering::Equal);
        let c = h.half_bins() as usize;
        assert_eq!(h.counts()[c + 1], 1);
        assert_eq!(h.counts()[c], 1);
    }
}
