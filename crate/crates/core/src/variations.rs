//! Truncated p-variations over spikeless segments.
//!
//! For one segment `[i0, i1]` and step multiple `M`,
//!
//! ```text
//! V(p, dt, M) = (1/M) * sum_{i=i0}^{i1-M} |X[i+M] - X[i]|^p * 1{|X[i+M] - X[i]| <= c * sqrt(dt*M) * gamma}
//! ```
//!
//! with truncation multiplier `c` (default 3). A trajectory's variation is
//! the sum over its segments. `gamma = inf` switches truncation off.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::series::{Segment, SegmentSet, TimeSeries};

pub const DEFAULT_TRUNC_MULTIPLIER: f64 = 3.0;

/// Default truncation ladder.
pub const DEFAULT_GAMMA_GRID: [f64; 10] = [1.0, 2.0, 4.0, 8.0, 10.0, 16.0, 32.0, 64.0, 128.0, 256.0];

/// Truncation factor, strictly positive and possibly infinite.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Gamma(f64);

impl Gamma {
    pub const INFINITE: Gamma = Gamma(f64::INFINITY);

    pub fn new(value: f64) -> Result<Self> {
        if value.is_nan() || value <= 0.0 {
            return Err(Error::invalid(format!("gamma must be > 0, got {value}")));
        }
        Ok(Gamma(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }

    /// Largest admitted increment magnitude for step multiple `m`.
    pub fn threshold(self, dt: f64, m: usize, trunc_multiplier: f64) -> f64 {
        if self.is_infinite() {
            f64::INFINITY
        } else {
            trunc_multiplier * (dt * m as f64).sqrt() * self.0
        }
    }

    pub fn default_grid() -> Vec<Gamma> {
        DEFAULT_GAMMA_GRID.iter().map(|&g| Gamma(g)).collect()
    }
}

impl fmt::Display for Gamma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinite() {
            f.write_str("inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl FromStr for Gamma {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("inf") || s.eq_ignore_ascii_case("infinity") {
            return Ok(Gamma::INFINITE);
        }
        let v = s.parse::<f64>().map_err(|_| Error::invalid(format!("bad gamma '{s}'")))?;
        Gamma::new(v)
    }
}

impl Serialize for Gamma {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        if self.is_infinite() {
            serializer.serialize_str("inf")
        } else {
            serializer.serialize_f64(self.0)
        }
    }
}

/// Neumaier compensated summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// `|d|^p`, with exact small integer powers done by multiplication.
#[inline]
pub(crate) fn pow_abs(d: f64, p: f64) -> f64 {
    let a = d.abs();
    if p == 2.0 {
        a * a
    } else if p == 4.0 {
        let s = a * a;
        s * s
    } else if p == 1.0 {
        a
    } else {
        a.powf(p)
    }
}

fn check_p(p: f64) -> Result<()> {
    if !(p.is_finite() && p > 0.0) {
        return Err(Error::invalid(format!("p must be finite and > 0, got {p}")));
    }
    Ok(())
}

fn check_trunc(c: f64) -> Result<()> {
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::invalid(format!("trunc_multiplier must be finite and > 0, got {c}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VariationParams {
    pub p: f64,
    pub m: usize,
    pub gamma: Gamma,
    pub trunc_multiplier: f64,
}

impl VariationParams {
    pub fn new(p: f64, m: usize, gamma: Gamma) -> Result<Self> {
        let params = Self { p, m, gamma, trunc_multiplier: DEFAULT_TRUNC_MULTIPLIER };
        params.validate()?;
        Ok(params)
    }

    pub fn with_trunc_multiplier(mut self, c: f64) -> Result<Self> {
        self.trunc_multiplier = c;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        check_p(self.p)?;
        if self.m == 0 {
            return Err(Error::invalid("step multiple M must be >= 1"));
        }
        check_trunc(self.trunc_multiplier)
    }
}

/// Summed variation with the number of increments that passed truncation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Variation {
    pub value: f64,
    pub n_increments: usize,
    pub segments_used: usize,
}

fn segment_sum(x: &[f64], seg: Segment, params: &VariationParams, threshold: f64) -> (f64, usize) {
    let m = params.m;
    let mut acc = CompensatedSum::new();
    let mut kept = 0usize;
    for i in seg.i0..=seg.i1 - m {
        let d = (x[i + m] - x[i]).abs();
        if d <= threshold {
            acc.add(pow_abs(d, params.p));
            kept += 1;
        }
    }
    (acc.value() / m as f64, kept)
}

/// Variation over one segment; `None` when the segment holds no `M`-step
/// increment.
pub fn segment_variation(series: &TimeSeries, seg: Segment, params: &VariationParams) -> Result<Option<f64>> {
    params.validate()?;
    if seg.i1 >= series.len() || seg.i0 >= seg.i1 {
        return Err(Error::invalid(format!(
            "segment [{}, {}] invalid for series of length {}",
            seg.i0,
            seg.i1,
            series.len()
        )));
    }
    if !seg.admits(params.m) {
        return Ok(None);
    }
    let thr = params.gamma.threshold(series.dt(), params.m, params.trunc_multiplier);
    Ok(Some(segment_sum(series.values(), seg, params, thr).0))
}

/// Sum of segment variations over all segments admitting `M`.
pub fn total_variation(series: &TimeSeries, segs: &SegmentSet, params: &VariationParams) -> Result<Variation> {
    params.validate()?;
    let thr = params.gamma.threshold(series.dt(), params.m, params.trunc_multiplier);
    let mut acc = CompensatedSum::new();
    let mut kept = 0;
    let mut used = 0;
    for &seg in segs.segments().iter().filter(|s| s.admits(params.m)) {
        let (v, k) = segment_sum(series.values(), seg, params, thr);
        acc.add(v);
        kept += k;
        used += 1;
    }
    if used == 0 {
        return Err(Error::NoAdmissibleSegment { m: params.m, max_usable: segs.max_step() });
    }
    Ok(Variation { value: acc.value(), n_increments: kept, segments_used: used })
}

/// Non-overlapping `M`-step p-variation started at `s0` and bounded by `t1`
/// (both sample indices), without truncation.
pub fn bhat(series: &TimeSeries, s0: usize, t1: usize, p: f64, m: usize) -> Result<f64> {
    check_p(p)?;
    if m == 0 {
        return Err(Error::invalid("step multiple M must be >= 1"));
    }
    if t1 >= series.len() {
        return Err(Error::invalid(format!("t1 index {t1} outside series of length {}", series.len())));
    }
    if t1 < s0 || t1 - s0 < m {
        return Err(Error::invalid(format!("range [{s0}, {t1}] shorter than M={m}")));
    }
    let x = series.values();
    let terms = (t1 - s0) / m;
    Ok((1..=terms).map(|k| pow_abs(x[s0 + k * m] - x[s0 + (k - 1) * m], p)).collect::<CompensatedSum>().value())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub m: usize,
    pub value: f64,
    pub n_increments: usize,
}

/// `M -> V_gamma(p, dt, M)` for a fixed `p` and `gamma`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariationCurve {
    pub p: f64,
    pub gamma: Gamma,
    pub dt: f64,
    pub segment_count: usize,
    pub points: Vec<CurvePoint>,
    /// Requested step multiples that no segment admits.
    pub omitted: Vec<usize>,
}

impl VariationCurve {
    pub fn total_increments(&self) -> usize {
        self.points.iter().map(|pt| pt.n_increments).sum()
    }
}

fn check_m_list(ms: &[usize]) -> Result<()> {
    if ms.is_empty() {
        return Err(Error::invalid("M grid is empty"));
    }
    if ms[0] == 0 {
        return Err(Error::invalid("M values must be >= 1"));
    }
    if ms.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("M grid must be strictly increasing"));
    }
    Ok(())
}

pub fn variation_curve(
    series: &TimeSeries,
    segs: &SegmentSet,
    p: f64,
    gamma: Gamma,
    ms: &[usize],
    trunc_multiplier: f64,
) -> Result<VariationCurve> {
    let table = VariationTable::compute(series, segs, &[p], ms, &[gamma], trunc_multiplier)?;
    Ok(table.curve(0, 0))
}

/// Values of `V_gamma(p, dt, M)` over a full `(M, gamma, p)` grid.
///
/// Each `M` row sorts the increments of every segment once; all `gamma`
/// cut-offs for a given `p` then come out of one ordered pass, so the sum
/// for a larger `gamma` extends the sum for a smaller one.
#[derive(Debug, Clone)]
pub struct VariationTable {
    ps: Vec<f64>,
    ms: Vec<usize>,
    gammas: Vec<Gamma>,
    dt: f64,
    segment_count: usize,
    /// `values[mi][gi][pi]`; `None` when no segment admits that `M`.
    values: Vec<Option<Vec<Vec<f64>>>>,
    /// `counts[mi][gi]` increments surviving truncation.
    counts: Vec<Vec<usize>>,
}

impl VariationTable {
    pub fn compute(
        series: &TimeSeries,
        segs: &SegmentSet,
        ps: &[f64],
        ms: &[usize],
        gammas: &[Gamma],
        trunc_multiplier: f64,
    ) -> Result<Self> {
        check_m_list(ms)?;
        check_trunc(trunc_multiplier)?;
        if ps.is_empty() || gammas.is_empty() {
            return Err(Error::invalid("p and gamma grids must be nonempty"));
        }
        for &p in ps {
            check_p(p)?;
        }
        let dt = series.dt();
        let x = series.values();

        let rows: Vec<Option<Row>> =
            ms.par_iter().map(|&m| table_row(x, segs, m, ps, gammas, dt, trunc_multiplier)).collect();

        if rows.iter().all(Option::is_none) {
            return Err(Error::NoAdmissibleSegment { m: ms[0], max_usable: segs.max_step() });
        }
        let mut values = Vec::with_capacity(ms.len());
        let mut counts = Vec::with_capacity(ms.len());
        for row in rows {
            match row {
                Some((v, c)) => {
                    values.push(Some(v));
                    counts.push(c);
                }
                None => {
                    values.push(None);
                    counts.push(vec![0; gammas.len()]);
                }
            }
        }
        Ok(Self {
            ps: ps.to_vec(),
            ms: ms.to_vec(),
            gammas: gammas.to_vec(),
            dt,
            segment_count: segs.len(),
            values,
            counts,
        })
    }

    pub fn ps(&self) -> &[f64] {
        &self.ps
    }

    pub fn ms(&self) -> &[usize] {
        &self.ms
    }

    pub fn gammas(&self) -> &[Gamma] {
        &self.gammas
    }

    /// `V` at grid indices, `None` if that `M` is inadmissible.
    pub fn value(&self, mi: usize, gi: usize, pi: usize) -> Option<f64> {
        self.values[mi].as_ref().map(|v| v[gi][pi])
    }

    pub fn count(&self, mi: usize, gi: usize) -> usize {
        self.counts[mi][gi]
    }

    pub fn curve(&self, gi: usize, pi: usize) -> VariationCurve {
        let mut points = Vec::new();
        let mut omitted = Vec::new();
        for (mi, &m) in self.ms.iter().enumerate() {
            match self.value(mi, gi, pi) {
                Some(value) => points.push(CurvePoint { m, value, n_increments: self.count(mi, gi) }),
                None => omitted.push(m),
            }
        }
        VariationCurve {
            p: self.ps[pi],
            gamma: self.gammas[gi],
            dt: self.dt,
            segment_count: self.segment_count,
            points,
            omitted,
        }
    }
}

#[allow(clippy::type_complexity)]
/// Values `[gi][pi]` and surviving counts `[gi]` for one `M`.
type Row = (Vec<Vec<f64>>, Vec<usize>);

fn table_row(
    x: &[f64],
    segs: &SegmentSet,
    m: usize,
    ps: &[f64],
    gammas: &[Gamma],
    dt: f64,
    trunc_multiplier: f64,
) -> Option<Row> {
    // process gammas in increasing threshold order, report in caller order
    let thresholds: Vec<f64> = gammas.iter().map(|g| g.threshold(dt, m, trunc_multiplier)).collect();
    let mut order: Vec<usize> = (0..gammas.len()).collect();
    order.sort_by(|&a, &b| thresholds[a].total_cmp(&thresholds[b]));

    let mut totals = vec![vec![CompensatedSum::new(); ps.len()]; gammas.len()];
    let mut counts = vec![0usize; gammas.len()];
    let mut used = 0;
    let mut incs: Vec<f64> = Vec::new();

    for seg in segs.segments().iter().filter(|s| s.admits(m)) {
        used += 1;
        incs.clear();
        incs.extend((seg.i0..=seg.i1 - m).map(|i| (x[i + m] - x[i]).abs()));
        incs.sort_by(f64::total_cmp);
        let cuts: Vec<usize> = order.iter().map(|&g| incs.partition_point(|&d| d <= thresholds[g])).collect();
        for (k, &g) in order.iter().enumerate() {
            counts[g] += cuts[k];
        }
        for (pi, &p) in ps.iter().enumerate() {
            let mut acc = CompensatedSum::new();
            let mut pos = 0;
            for (k, &g) in order.iter().enumerate() {
                for &d in &incs[pos..cuts[k]] {
                    acc.add(pow_abs(d, p));
                }
                pos = cuts[k];
                totals[g][pi].add(acc.value() / m as f64);
            }
        }
    }
    if used == 0 {
        return None;
    }
    let values = totals.iter().map(|row| row.iter().map(CompensatedSum::value).collect()).collect();
    Some((values, counts))
}
