//! Spike and burst metrics extracted from recorded voltage traces.
//!
//! A spike is an upward crossing of a voltage threshold; a burst is a
//! maximal group of consecutive spikes whose inter-spike gaps never exceed
//! a maximal intra-burst gap. The burst period is the mean interval
//! between consecutive burst starts. Metrics that need at least two bursts
//! return [`Error::InsufficientData`] rather than a silent default.

use crate::error::{Error, Result};
use crate::num::Real;

/// Default spike threshold (mV).
pub const DEFAULT_SPIKE_THRESHOLD: f64 = 0.0;
/// Default maximal intra-burst inter-spike gap (ms).
pub const DEFAULT_MAX_INTRABURST_GAP: f64 = 300.0;

/// One detected burst of spikes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Burst<R> {
    /// Time of the burst's first spike (ms).
    pub start: R,
    /// Time of the burst's last spike (ms).
    pub end: R,
    /// Number of spikes in the burst.
    pub n_spikes: usize,
}

impl<R: Real> Burst<R> {
    /// Burst length: time from first to last spike (ms). A one-spike burst
    /// has length zero.
    pub fn length(&self) -> R {
        self.end - self.start
    }
}

/// Spike times and the bursts they group into, for one voltage trace.
#[derive(Debug, Clone, PartialEq)]
pub struct BurstMetrics<R> {
    /// Times of detected upward threshold crossings (ms).
    pub spikes: Vec<R>,
    /// Detected bursts, in time order.
    pub bursts: Vec<Burst<R>>,
}

impl<R: Real> BurstMetrics<R> {
    /// Detects spikes and bursts in a sampled voltage trace.
    ///
    /// A spike is recorded at the first sample at or above `threshold`
    /// following a sample below it. A new burst starts whenever the gap to
    /// the previous spike exceeds `max_gap`.
    pub fn detect(times: &[R], v: &[R], threshold: R, max_gap: R) -> Self {
        assert_eq!(times.len(), v.len(), "trace times and values must align");
        let mut spikes = Vec::new();
        for k in 1..v.len() {
            if v[k - 1] < threshold && v[k] >= threshold {
                spikes.push(times[k]);
            }
        }
        let mut bursts: Vec<Burst<R>> = Vec::new();
        for &t in &spikes {
            match bursts.last_mut() {
                Some(b) if t - b.end <= max_gap => {
                    b.end = t;
                    b.n_spikes += 1;
                }
                _ => bursts.push(Burst {
                    start: t,
                    end: t,
                    n_spikes: 1,
                }),
            }
        }
        BurstMetrics { spikes, bursts }
    }

    /// Detects spikes and bursts within a time window `[t0, t1]` of the
    /// trace, with bursts that touch either window edge (within `max_gap`)
    /// dropped, so truncated bursts never skew the statistics.
    pub fn detect_windowed(
        times: &[R],
        v: &[R],
        threshold: R,
        max_gap: R,
        t0: R,
        t1: R,
    ) -> Self {
        let lo = times.partition_point(|&t| t < t0);
        let hi = times.partition_point(|&t| t <= t1);
        let mut m = Self::detect(&times[lo..hi], &v[lo..hi], threshold, max_gap);
        m.bursts
            .retain(|b| b.start - t0 > max_gap && t1 - b.end > max_gap);
        m
    }

    /// Number of detected bursts.
    pub fn n_bursts(&self) -> usize {
        self.bursts.len()
    }

    /// Spike count of each burst.
    pub fn spikes_per_burst(&self) -> Vec<usize> {
        self.bursts.iter().map(|b| b.n_spikes).collect()
    }

    /// Intervals between consecutive burst starts (ms).
    pub fn start_intervals(&self) -> Vec<R> {
        self.bursts
            .windows(2)
            .map(|w| w[1].start - w[0].start)
            .collect()
    }

    /// Mean interval between consecutive burst starts (ms). Needs at least
    /// two bursts.
    pub fn period(&self) -> Result<R> {
        let iv = self.start_intervals();
        if iv.is_empty() {
            return Err(Error::InsufficientData(format!(
                "burst period needs at least 2 bursts, found {}",
                self.n_bursts()
            )));
        }
        Ok(mean(&iv))
    }

    /// Largest relative deviation of the burst-start intervals among the
    /// last `n` bursts from their mean. Needs at least `n >= 2` bursts.
    pub fn period_stability(&self, n: usize) -> Result<R> {
        if self.n_bursts() < n || n < 2 {
            return Err(Error::InsufficientData(format!(
                "period stability over {n} bursts needs {n} bursts, found {}",
                self.n_bursts()
            )));
        }
        let iv: Vec<R> = self.bursts[self.n_bursts() - n..]
            .windows(2)
            .map(|w| w[1].start - w[0].start)
            .collect();
        let m = mean(&iv);
        Ok(iv
            .iter()
            .map(|&x| ((x - m) / m).abs())
            .fold(R::zero(), R::max))
    }

    /// Burst lengths (first-to-last-spike times, ms).
    pub fn burst_lengths(&self) -> Vec<R> {
        self.bursts.iter().map(Burst::length).collect()
    }

    /// Coefficient of variation (population std / mean) of the burst
    /// lengths. Needs at least two bursts.
    pub fn length_cv(&self) -> Result<R> {
        let lens = self.burst_lengths();
        if lens.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "burst-length variability needs at least 2 bursts, found {}",
                lens.len()
            )));
        }
        let m = mean(&lens);
        let var = lens
            .iter()
            .map(|&x| (x - m) * (x - m))
            .fold(R::zero(), |a, b| a + b)
            / R::of_usize(lens.len());
        Ok(var.sqrt() / m)
    }

    /// Mean burst length divided by the burst period. Needs at least two
    /// bursts.
    pub fn duty_cycle(&self) -> Result<R> {
        let period = self.period()?;
        Ok(mean(&self.burst_lengths()) / period)
    }

    /// Mean number of spikes per burst. Needs at least one burst.
    pub fn mean_spikes_per_burst(&self) -> Result<R> {
        if self.bursts.is_empty() {
            return Err(Error::InsufficientData(
                "spikes per burst needs at least 1 burst".into(),
            ));
        }
        let total: usize = self.bursts.iter().map(|b| b.n_spikes).sum();
        Ok(R::of_usize(total) / R::of_usize(self.bursts.len()))
    }
}

/// Fraction of time two burst trains overlap: total time both are inside a
/// burst, divided by the smaller of the two total burst durations. Zero
/// when either train has no positive-length burst time (perfectly
/// anti-phase trains also score zero).
pub fn burst_overlap_fraction<R: Real>(a: &BurstMetrics<R>, b: &BurstMetrics<R>) -> R {
    let total = |m: &BurstMetrics<R>| {
        m.bursts
            .iter()
            .map(Burst::length)
            .fold(R::zero(), |x, y| x + y)
    };
    let (ta, tb) = (total(a), total(b));
    let denom = ta.min(tb);
    if denom <= R::zero() {
        return R::zero();
    }
    let mut shared = R::zero();
    for x in &a.bursts {
        for y in &b.bursts {
            let lo = x.start.max(y.start);
            let hi = x.end.min(y.end);
            if hi > lo {
                shared = shared + (hi - lo);
            }
        }
    }
    shared / denom
}

fn mean<R: Real>(xs: &[R]) -> R {
    xs.iter().fold(R::zero(), |a, &b| a + b) / R::of_usize(xs.len())
}
