//! Spike detection and excision of spike neighbourhoods.

use std::io::BufRead;

use crate::error::{Error, Result};
use crate::series::{Segment, SegmentSet, TimeSeries};

/// Index positions within this many samples of a window boundary count as
/// lying on it; absorbs rounding in `(tau - pre - t0) / dt`.
const BOUNDARY_SLACK: f64 = 1e-9;

/// Excluded neighbourhood `(tau - pre, tau + post)` around each spike time.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct SpikeWindow {
    pub pre: f64,
    pub post: f64,
}

impl Default for SpikeWindow {
    fn default() -> Self {
        Self { pre: 0.12, post: 0.18 }
    }
}

impl SpikeWindow {
    pub fn new(pre: f64, post: f64) -> Result<Self> {
        if !(pre.is_finite() && pre >= 0.0 && post.is_finite() && post >= 0.0) {
            return Err(Error::invalid(format!(
                "spike window needs finite pre >= 0 and post >= 0, got ({pre}, {post})"
            )));
        }
        Ok(Self { pre, post })
    }
}

/// Strictly increasing spike times in seconds.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SpikeTrain {
    times: Vec<f64>,
}

impl SpikeTrain {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if let Some(t) = times.iter().find(|t| !t.is_finite()) {
            return Err(Error::invalid(format!("spike time {t} is not finite")));
        }
        if let Some(w) = times.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::invalid(format!("spike times must be strictly increasing ({} then {})", w[0], w[1])));
        }
        Ok(Self { times })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Fails if any spike lies outside the observation interval of `series`.
    pub fn check_within(&self, series: &TimeSeries) -> Result<()> {
        let (lo, hi) = (series.t0(), series.t0() + series.duration());
        let slack = BOUNDARY_SLACK * series.dt();
        match self.times.iter().find(|&&t| t < lo - slack || t > hi + slack) {
            Some(t) => Err(Error::invalid(format!("spike time {t} outside [{lo}, {hi}]"))),
            None => Ok(()),
        }
    }

    /// One spike time per line; blank lines and `#` comments ignored.
    pub fn parse<R: BufRead>(source: R) -> Result<Self> {
        let mut times = Vec::new();
        for (idx, line) in source.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let t = trimmed
                .parse::<f64>()
                .map_err(|_| Error::Parse { line: idx + 1, message: format!("not a spike time: '{trimmed}'") })?;
            times.push(t);
        }
        Self::new(times)
    }
}

/// Upward threshold crossings with refractory suppression.
///
/// A crossing at sample `i` means `x[i-1] < threshold <= x[i]`; its time is
/// `t0 + i*dt`. Crossings less than `min_separation` after the last accepted
/// one are dropped.
pub fn detect_spikes(series: &TimeSeries, threshold: f64, min_separation: f64) -> Result<SpikeTrain> {
    if !threshold.is_finite() {
        return Err(Error::invalid(format!("threshold must be finite, got {threshold}")));
    }
    if !(min_separation >= series.dt()) {
        return Err(Error::invalid(format!("min_separation ({min_separation}) must be at least dt ({})", series.dt())));
    }
    let x = series.values();
    let mut times = Vec::new();
    let mut last: Option<f64> = None;
    for i in 1..x.len() {
        if x[i - 1] < threshold && threshold <= x[i] {
            let t = series.time_at(i);
            if last.is_none_or(|prev| t - prev >= min_separation) {
                times.push(t);
                last = Some(t);
            }
        }
    }
    SpikeTrain::new(times)
}

/// Maximal runs of samples outside every open window `(tau - pre, tau + post)`.
///
/// Samples exactly on a window boundary are kept. Runs of fewer than two
/// samples carry no increment and are dropped.
pub fn spikeless_segments(series: &TimeSeries, spikes: &SpikeTrain, window: SpikeWindow) -> SegmentSet {
    let n = series.len();
    let mut excluded: Vec<(usize, usize)> = Vec::with_capacity(spikes.len());
    for &tau in spikes.times() {
        let lo = (tau - window.pre - series.t0()) / series.dt();
        let hi = (tau + window.post - series.t0()) / series.dt();
        // first index strictly after lo, last index strictly before hi
        let first = (lo + BOUNDARY_SLACK).floor() + 1.0;
        let last = (hi - BOUNDARY_SLACK).ceil() - 1.0;
        if last < first || last < 0.0 || first > (n - 1) as f64 {
            continue;
        }
        let first = first.max(0.0) as usize;
        let last = (last as usize).min(n - 1);
        excluded.push((first, last));
    }

    let mut segments = Vec::new();
    let mut start = 0usize;
    for (first, last) in excluded {
        if first > start && first - 1 > start {
            segments.push(Segment { i0: start, i1: first - 1 });
        }
        start = start.max(last + 1);
    }
    if start < n - 1 {
        segments.push(Segment { i0: start, i1: n - 1 });
    }
    SegmentSet::new(segments, n).expect("excision produces ordered disjoint segments")
}
