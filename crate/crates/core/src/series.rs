//! Uniformly sampled scalar paths, index segments and the text file format.
//!
//! A series file is UTF-8 text with one sample per line, either a bare
//! `<value>` (the step must then be supplied by the caller) or
//! `<time><sep><value>` where the separator is a comma, tab or any run of
//! whitespace. Lines starting with `#` are comments.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};

/// Relative tolerance on the spacing of two-column input.
pub const SPACING_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    dt: f64,
    t0: f64,
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(dt: f64, t0: f64, values: Vec<f64>) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::invalid(format!("dt must be finite and > 0, got {dt}")));
        }
        if !t0.is_finite() {
            return Err(Error::invalid(format!("t0 must be finite, got {t0}")));
        }
        if values.len() < 2 {
            return Err(Error::Size { found: values.len(), required: 2 });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("sample {i} is not finite ({})", values[i])));
        }
        Ok(Self { dt, t0, values })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Time of sample `i`.
    pub fn time_at(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    /// Observation length `(N - 1) * dt`.
    pub fn duration(&self) -> f64 {
        (self.values.len() - 1) as f64 * self.dt
    }

    /// The whole series as a single segment.
    pub fn full_segment(&self) -> Segment {
        Segment { i0: 0, i1: self.values.len() - 1 }
    }

    /// Copy with every value multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.dt, self.t0, self.values.iter().map(|v| v * factor).collect())
    }
}

/// Convenience for [`TimeSeries::duration`].
pub fn duration(series: &TimeSeries) -> f64 {
    series.duration()
}

/// Inclusive index interval `[i0, i1]` of a spikeless stretch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment {
    pub i0: usize,
    pub i1: usize,
}

impl Segment {
    pub fn new(i0: usize, i1: usize) -> Result<Self> {
        if i0 >= i1 {
            return Err(Error::invalid(format!("segment needs i0 < i1, got [{i0}, {i1}]")));
        }
        Ok(Self { i0, i1 })
    }

    pub fn samples(&self) -> usize {
        self.i1 - self.i0 + 1
    }

    /// Largest step multiple with at least one increment inside the segment.
    pub fn max_step(&self) -> usize {
        self.i1 - self.i0
    }

    /// True when at least one `m`-step increment fits.
    pub fn admits(&self, m: usize) -> bool {
        m >= 1 && self.i1 - self.i0 >= m
    }
}

/// Ordered, disjoint segments of one series.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentSet {
    segments: Vec<Segment>,
    series_len: usize,
}

impl SegmentSet {
    pub fn new(segments: Vec<Segment>, series_len: usize) -> Result<Self> {
        for w in segments.windows(2) {
            if w[0].i1 >= w[1].i0 {
                return Err(Error::invalid(format!(
                    "segments must be disjoint and increasing: [{}, {}] then [{}, {}]",
                    w[0].i0, w[0].i1, w[1].i0, w[1].i1
                )));
            }
        }
        if let Some(last) = segments.last() {
            if last.i1 >= series_len {
                return Err(Error::invalid(format!("segment end {} outside series of length {series_len}", last.i1)));
            }
        }
        Ok(Self { segments, series_len })
    }

    /// The whole series as the only segment.
    pub fn whole(series: &TimeSeries) -> Self {
        Self { segments: vec![series.full_segment()], series_len: series.len() }
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn series_len(&self) -> usize {
        self.series_len
    }

    /// Largest step multiple usable on at least one segment (0 if none).
    pub fn max_step(&self) -> usize {
        self.segments.iter().map(Segment::max_step).max().unwrap_or(0)
    }

    /// Subset of segments admitting `m`-step increments.
    pub fn admitting(&self, m: usize) -> SegmentSet {
        SegmentSet {
            segments: self.segments.iter().copied().filter(|s| s.admits(m)).collect(),
            series_len: self.series_len,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SeriesFormat {
    /// Decide from the first data line.
    #[default]
    Auto,
    OneColumn,
    TwoColumn,
}

fn split_fields(line: &str) -> Vec<&str> {
    if line.contains(',') {
        line.split(',').map(str::trim).collect()
    } else {
        line.split_whitespace().collect()
    }
}

fn parse_number(token: &str, line: usize) -> Result<f64> {
    token.parse::<f64>().map_err(|_| Error::Parse { line, message: format!("not a number: '{token}'") })
}

/// Read a series from text.
///
/// One-column input needs `dt_override`. For two-column input the step is
/// the mean gap `(t_last - t_first) / (N - 1)`; every individual gap must lie
/// within [`SPACING_TOLERANCE`] (relative) of it. An explicit override wins
/// over the derived step.
pub fn parse_series<R: BufRead>(source: R, format: SeriesFormat, dt_override: Option<f64>) -> Result<TimeSeries> {
    let mut format = format;
    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut header_dt = None;
    let mut header_t0 = None;

    for (idx, line) in source.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(comment) = trimmed.strip_prefix('#') {
            if let Some((key, value)) = comment.trim().split_once(':') {
                let slot = match key.trim() {
                    "dt" => Some(&mut header_dt),
                    "t0" => Some(&mut header_t0),
                    _ => None,
                };
                if let Some(slot) = slot {
                    *slot = Some(parse_number(value.trim(), line_no)?);
                }
            }
            continue;
        }
        let fields = split_fields(trimmed);
        if format == SeriesFormat::Auto {
            format = match fields.len() {
                1 => SeriesFormat::OneColumn,
                2 => SeriesFormat::TwoColumn,
                n => {
                    return Err(Error::Parse { line: line_no, message: format!("expected 1 or 2 columns, found {n}") })
                }
            };
        }
        let expected = if format == SeriesFormat::OneColumn { 1 } else { 2 };
        if fields.len() != expected {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected {expected} column(s), found {}", fields.len()),
            });
        }
        let mut nums = Vec::with_capacity(2);
        for f in &fields {
            let v = parse_number(f, line_no)?;
            if !v.is_finite() {
                return Err(Error::Parse { line: line_no, message: format!("non-finite value '{f}'") });
            }
            nums.push(v);
        }
        if expected == 2 {
            times.push(nums[0]);
            values.push(nums[1]);
        } else {
            values.push(nums[0]);
        }
    }

    if values.len() < 2 {
        return Err(Error::Size { found: values.len(), required: 2 });
    }

    match format {
        SeriesFormat::TwoColumn => {
            let n = times.len();
            let mean_gap = (times[n - 1] - times[0]) / (n - 1) as f64;
            if !(mean_gap > 0.0) {
                return Err(Error::Format("time column must be strictly increasing".into()));
            }
            for (i, w) in times.windows(2).enumerate() {
                let gap = w[1] - w[0];
                if (gap - mean_gap).abs() > SPACING_TOLERANCE * mean_gap {
                    return Err(Error::Format(format!(
                        "non-uniform spacing between samples {i} and {}: gap {gap} vs step {mean_gap}",
                        i + 1
                    )));
                }
            }
            TimeSeries::new(dt_override.or(header_dt).unwrap_or(mean_gap), times[0], values)
        }
        _ => {
            let dt = dt_override.or(header_dt).ok_or_else(|| {
                Error::Format("one-column input requires an explicit dt (flag or '# dt:' header)".into())
            })?;
            TimeSeries::new(dt, header_t0.unwrap_or(0.0), values)
        }
    }
}

/// Write a series in two-column form (`time,value`), or bare values.
///
/// A `# dt:` / `# t0:` header pins the step and start exactly; values use
/// the shortest representation that round-trips.
pub fn write_series<W: Write>(mut out: W, series: &TimeSeries, with_time: bool) -> Result<()> {
    writeln!(out, "# dt: {}", series.dt())?;
    writeln!(out, "# t0: {}", series.t0())?;
    for (i, v) in series.values().iter().enumerate() {
        if with_time {
            writeln!(out, "{},{}", series.time_at(i), v)?;
        } else {
            writeln!(out, "{v}")?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn parse(s: &str, dt: Option<f64>) -> Result<TimeSeries> {
        parse_series(s.as_bytes(), SeriesFormat::Auto, dt)
    }

    #[test]
    fn one_column_with_dt() {
        let ts = parse("0.0\n1.0\n3.0", Some(1.0)).unwrap();
        assert_eq!(ts.dt(), 1.0);
        assert_eq!(ts.values(), &[0.0, 1.0, 3.0]);
    }

    #[test]
    fn two_column_derives_step() {
        let ts = parse("0.0,-60.0\n0.0006,-60.1", None).unwrap();
        assert_eq!(ts.dt(), 6e-4);
        assert_eq!(ts.values(), &[-60.0, -60.1]);
    }

    #[test]
    fn separators_and_comments() {
        let ts = parse("# header\n0\t1.5\n0.5   2.5\n\n1.0 3.5\n", None).unwrap();
        assert_eq!(ts.values(), &[1.5, 2.5, 3.5]);
        assert_eq!(ts.dt(), 0.5);
    }

    #[test]
    fn non_uniform_spacing_rejected() {
        let err = parse("0.0,-60.0\n0.1,-60.1\n0.3,-60.2", None).unwrap_err();
        assert!(matches!(err, Error::Format(_)), "{err}");
    }

    #[test]
    fn bad_token_reports_line() {
        let err = parse("1.0\n2.0\nabc\n", Some(1.0)).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn too_few_samples() {
        assert!(matches!(parse("1.0\n", Some(1.0)), Err(Error::Size { found: 1, .. })));
        assert!(matches!(parse("# only comments\n", Some(1.0)), Err(Error::Size { found: 0, .. })));
    }

    #[test]
    fn one_column_needs_dt() {
        assert!(matches!(parse("1\n2\n", None), Err(Error::Format(_))));
    }

    #[test]
    fn durations() {
        let ts = TimeSeries::new(6e-4, 0.0, vec![0.0; 100_001]).unwrap();
        assert!((ts.duration() - 60.0).abs() < 1e-9);
        let ts = TimeSeries::new(1.0, 0.0, vec![0.0; 2]).unwrap();
        assert_eq!(duration(&ts), 1.0);
        let ts = TimeSeries::new(2e-4, 0.0, vec![0.0; 300_001]).unwrap();
        assert!((ts.duration() - 60.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_nan() {
        assert!(TimeSeries::new(1.0, 0.0, vec![0.0, f64::NAN]).is_err());
        assert!(TimeSeries::new(0.0, 0.0, vec![0.0, 1.0]).is_err());
    }

    #[test]
    fn segment_set_checks_order() {
        let a = Segment::new(0, 3).unwrap();
        let b = Segment::new(3, 5).unwrap();
        assert!(SegmentSet::new(vec![a, b], 10).is_err());
        assert!(SegmentSet::new(vec![a], 3).is_err());
        assert!(Segment::new(2, 2).is_err());
    }

    proptest! {
        #[test]
        fn round_trip(values in prop::collection::vec(-1e6f64..1e6, 2..200), dt in 1e-5f64..1.0) {
            let ts = TimeSeries::new(dt, 0.0, values.clone()).unwrap();
            let mut buf = Vec::new();
            write_series(&mut buf, &ts, false).unwrap();
            let back = parse_series(&buf[..], SeriesFormat::OneColumn, Some(dt)).unwrap();
            prop_assert_eq!(back.values(), &values[..]);
        }

        #[test]
        fn round_trip_self_describing(
            values in prop::collection::vec(-1e3f64..1e3, 2..200),
            dt in 1e-5f64..1.0,
            t0 in -10.0f64..10.0,
            with_time in any::<bool>(),
        ) {
            let ts = TimeSeries::new(dt, t0, values).unwrap();
            let mut buf = Vec::new();
            write_series(&mut buf, &ts, with_time).unwrap();
            let back = parse_series(&buf[..], SeriesFormat::Auto, None).unwrap();
            prop_assert_eq!(back, ts);
        }

        #[test]
        fn jitter_below_tolerance_gives_mean_gap(
            n in 3usize..100,
            jitter in prop::collection::vec(-0.4f64..0.4, 100),
        ) {
            let dt = 6e-4;
            let times: Vec<f64> = (0..n).map(|i| i as f64 * dt + jitter[i] * dt * 1e-10).collect();
            let text: String = times.iter().enumerate().map(|(i, t)| format!("{t},{i}\n")).collect();
            let ts = parse(&text, None).unwrap();
            let mean = (times[n - 1] - times[0]) / (n - 1) as f64;
            prop_assert_eq!(ts.dt(), mean);
        }
    }
}
