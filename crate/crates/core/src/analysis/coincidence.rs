use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::detection::{TimeTagStream, PS_PER_NS};
use crate::error::{check_positive, Error, Result};

/// Largest number of channels a coincidence mask can hold.
pub const MAX_CHANNELS: usize = 32;

/// Clock cycles tallied by the set of channels that clicked in them.
///
/// A click on channel `k` at time `t` is assigned to cycle
/// `round((t - delay_k) / period)`. Bit `k` of a mask is set when channel `k`
/// clicked at least once in that cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceCounts {
    n_channels: usize,
    period_ns: f64,
    duration_ns: f64,
    masks: BTreeMap<u32, u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderRate {
    pub order: u32,
    /// Mean over channel subsets of this size, per second.
    pub rate_hz: f64,
    /// Mean number of coincident cycles per subset.
    pub counts: f64,
}

impl CoincidenceCounts {
    pub fn from_streams(
        streams: &[&TimeTagStream],
        delays_ns: &[f64],
        period_ns: f64,
        duration_ns: f64,
    ) -> Result<Self> {
        check_positive("period_ns", period_ns)?;
        check_positive("duration_ns", duration_ns)?;
        if streams.is_empty() || streams.len() > MAX_CHANNELS {
            return Err(Error::InvalidParameter {
                field: "streams",
                reason: format!("need 1 to {MAX_CHANNELS} channels, got {}", streams.len()),
            });
        }
        if delays_ns.len() != streams.len() {
            return Err(Error::InvalidParameter {
                field: "delays_ns",
                reason: format!("{} delays for {} streams", delays_ns.len(), streams.len()),
            });
        }
        let period_ps = period_ns * PS_PER_NS;
        let mut by_cycle: HashMap<i64, u32> = HashMap::new();
        for (bit, (stream, &delay)) in streams.iter().zip(delays_ns).enumerate() {
            let delay_ps = delay * PS_PER_NS;
            for &t in stream.tags_ps() {
                let cycle = ((t as f64 - delay_ps) / period_ps).round() as i64;
                *by_cycle.entry(cycle).or_default() |= 1 << bit;
            }
        }
        let mut masks = BTreeMap::new();
        for mask in by_cycle.into_values() {
            *masks.entry(mask).or_default() += 1;
        }
        Ok(Self {
            n_channels: streams.len(),
            period_ns,
            duration_ns,
            masks,
        })
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn duration_ns(&self) -> f64 {
        self.duration_ns
    }

    pub fn masks(&self) -> &BTreeMap<u32, u64> {
        &self.masks
    }

    /// Combines counts from disjoint time ranges.
    pub fn merge(&mut self, other: &Self) -> Result<()> {
        if self.n_channels != other.n_channels {
            return Err(Error::HistogramMismatch("channel count"));
        }
        if self.period_ns != other.period_ns {
            return Err(Error::HistogramMismatch("period"));
        }
        for (&mask, &count) in &other.masks {
            *self.masks.entry(mask).or_default() += count;
        }
        self.duration_ns += other.duration_ns;
        Ok(())
    }

    /// Cycles in which every channel of `subset` clicked, whatever the others did.
    pub fn count_including(&self, subset: u32) -> u64 {
        self.masks
            .iter()
            .filter(|(&mask, _)| mask & subset == subset)
            .map(|(_, &c)| c)
            .sum()
    }

    /// Cycles in which exactly the channels of `subset` clicked.
    pub fn count_exact(&self, subset: u32) -> u64 {
        self.masks.get(&subset).copied().unwrap_or(0)
    }

    pub fn order_rate(&self, order: u32) -> Result<OrderRate> {
        let n = self.n_channels as u32;
        if order == 0 || order > n {
            return Err(Error::InvalidParameter {
                field: "order",
                reason: format!("{order} outside 1..={n}"),
            });
        }
        let subsets: Vec<u32> = (0u64..1 << n)
            .map(|s| s as u32)
            .filter(|s| s.count_ones() == order)
            .collect();
        let total: u64 = subsets.iter().map(|&s| self.count_including(s)).sum();
        let counts = total as f64 / subsets.len() as f64;
        Ok(OrderRate {
            order,
            rate_hz: counts / (self.duration_ns * 1e-9),
            counts,
        })
    }

    pub fn order_rates(&self) -> Vec<OrderRate> {
        (1..=self.n_channels as u32)
            .map(|k| self.order_rate(k).expect("order within channel count"))
            .collect()
    }
}
