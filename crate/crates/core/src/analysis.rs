//! Jump/continuity diagnostics built on truncated variations.
//!
//! Two views of the same dichotomy:
//!
//! * fixed `p = 4`, varying `M`: `V(4, dt, 2M) / V(4, dt, M)` is about 2 for
//!   a continuous semimartingale and about 1 when jumps dominate;
//! * fixed `M`, varying `p`: the log-ratio curve
//!   `p -> log(V(p, dt, 2M) / V(p, dt, M))` should track
//!   `(p/2 - 1) log 2` for a continuous path, and
//!   `min((p/2 - 1) log 2, 0)` when jumps are present.
//!
//! A path matching neither reference is not a discretely observed
//! semimartingale. The thresholds turning curve distances into a verdict are
//! conventions of this crate and are all configurable.

use std::f64::consts::LN_2;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::series::{SegmentSet, TimeSeries};
use crate::variations::{variation_curve, Gamma, VariationTable, DEFAULT_TRUNC_MULTIPLIER};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ReferenceKind {
    Continuous,
    Jumps,
}

/// Expected log-ratio at power `p`.
pub fn reference_logratio(p: f64, kind: ReferenceKind) -> Result<f64> {
    if !(p.is_finite() && p > 0.0) {
        return Err(Error::invalid(format!("p must be finite and > 0, got {p}")));
    }
    let line = (p / 2.0 - 1.0) * LN_2;
    Ok(match kind {
        ReferenceKind::Continuous => line,
        ReferenceKind::Jumps => line.min(0.0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogRatioPoint {
    pub p: f64,
    pub logratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogRatioCurve {
    pub m: usize,
    pub gamma: Gamma,
    pub points: Vec<LogRatioPoint>,
    /// Powers where either variation vanished.
    pub omitted: Vec<f64>,
}

impl LogRatioCurve {
    pub fn value_at(&self, p: f64) -> Option<f64> {
        self.points.iter().find(|pt| pt.p == p).map(|pt| pt.logratio)
    }
}

fn check_p_grid(ps: &[f64]) -> Result<()> {
    if ps.is_empty() {
        return Err(Error::invalid("p grid is empty"));
    }
    if let Some(p) = ps.iter().find(|p| !(p.is_finite() && **p > 0.0)) {
        return Err(Error::invalid(format!("p grid values must be finite and > 0, got {p}")));
    }
    Ok(())
}

/// Segments usable for both `M` and `2M`; each ratio compares the same
/// stretches of the path.
fn paired_segments(segs: &SegmentSet, m: usize) -> Result<SegmentSet> {
    if m == 0 {
        return Err(Error::invalid("step multiple M must be >= 1"));
    }
    let usable = segs.admitting(2 * m);
    if usable.is_empty() {
        return Err(Error::NoAdmissibleSegment { m: 2 * m, max_usable: segs.max_step() });
    }
    Ok(usable)
}

fn curves_from_table(table: &VariationTable, m: usize) -> Vec<LogRatioCurve> {
    (0..table.gammas().len())
        .map(|gi| {
            let mut points = Vec::new();
            let mut omitted = Vec::new();
            for (pi, &p) in table.ps().iter().enumerate() {
                let lo = table.value(0, gi, pi).unwrap_or(0.0);
                let hi = table.value(1, gi, pi).unwrap_or(0.0);
                if lo > 0.0 && hi > 0.0 {
                    points.push(LogRatioPoint { p, logratio: (hi / lo).ln() });
                } else {
                    omitted.push(p);
                }
            }
            LogRatioCurve { m, gamma: table.gammas()[gi], points, omitted }
        })
        .collect()
}

/// Log-ratio curves for several truncation factors at once.
pub fn logratio_curves(
    series: &TimeSeries,
    segs: &SegmentSet,
    m: usize,
    gammas: &[Gamma],
    ps: &[f64],
    trunc_multiplier: f64,
) -> Result<Vec<LogRatioCurve>> {
    check_p_grid(ps)?;
    let usable = paired_segments(segs, m)?;
    let table = VariationTable::compute(series, &usable, ps, &[m, 2 * m], gammas, trunc_multiplier)?;
    Ok(curves_from_table(&table, m))
}

pub fn logratio_curve(
    series: &TimeSeries,
    segs: &SegmentSet,
    m: usize,
    gamma: Gamma,
    ps: &[f64],
    trunc_multiplier: f64,
) -> Result<LogRatioCurve> {
    Ok(logratio_curves(series, segs, m, &[gamma], ps, trunc_multiplier)?.remove(0))
}

/// `V(4, dt, 2M) / V(4, dt, M)`: near 2 for continuous paths, near 1 when
/// jumps dominate.
pub fn ratio4_statistic(
    series: &TimeSeries,
    segs: &SegmentSet,
    gamma: Gamma,
    m: usize,
    trunc_multiplier: f64,
) -> Result<f64> {
    let usable = paired_segments(segs, m)?;
    let table = VariationTable::compute(series, &usable, &[4.0], &[m, 2 * m], &[gamma], trunc_multiplier)?;
    let lo = table.value(0, 0, 0).unwrap_or(0.0);
    let hi = table.value(1, 0, 0).unwrap_or(0.0);
    if lo <= 0.0 {
        return Err(Error::Degenerate(format!("4-variation at M={m} is zero")));
    }
    Ok(hi / lo)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    ContinuousSemimartingale,
    SemimartingaleWithJumps,
    NotSemimartingale,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassifierConfig {
    pub p_grid: Vec<f64>,
    /// Truncation ladder; an infinite factor is appended when missing.
    pub gamma_grid: Vec<Gamma>,
    /// Base step multiple of the log-ratio curves.
    pub m_base: usize,
    /// Base step multiple of the 4-variation ratio.
    pub m_min: usize,
    pub trunc_multiplier: f64,
    /// Acceptance distance to a reference.
    pub delta: f64,
    /// Distance to both references beyond which the path is rejected.
    pub delta_reject: f64,
    /// Sup-norm change below which curves count as stabilized in gamma.
    pub eps_stab: f64,
    pub p_fit_min: f64,
    pub p_fit_max: f64,
    /// Open interval around p = 2 left out of the fit.
    pub p_exclude: (f64, f64),
    /// Step multiples for the 2-variation shape check.
    pub shape_m_grid: Vec<usize>,
    /// Relative margin an interior maximum must clear at both ends.
    pub shape_margin: f64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            p_grid: (1..=24).map(|k| 0.25 * k as f64).collect(),
            gamma_grid: Gamma::default_grid(),
            m_base: 1,
            m_min: 1,
            trunc_multiplier: DEFAULT_TRUNC_MULTIPLIER,
            delta: 0.15,
            delta_reject: 0.25,
            eps_stab: 0.01,
            p_fit_min: 0.5,
            p_fit_max: 6.0,
            p_exclude: (1.8, 2.2),
            shape_m_grid: vec![1, 2, 3, 4, 5, 6, 8, 10, 12, 16, 20, 24, 32, 40, 48, 64, 80, 96, 128, 160, 192, 240],
            shape_margin: 0.05,
        }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<()> {
        check_p_grid(&self.p_grid)?;
        if self.gamma_grid.is_empty() {
            return Err(Error::invalid("gamma grid is empty"));
        }
        if self.m_base == 0 || self.m_min == 0 {
            return Err(Error::invalid("m_base and m_min must be >= 1"));
        }
        for (name, v) in [("delta", self.delta), ("delta_reject", self.delta_reject), ("eps_stab", self.eps_stab)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        if !(self.p_fit_min < self.p_fit_max) {
            return Err(Error::invalid("p_fit_min must be below p_fit_max"));
        }
        if !self.p_grid.iter().any(|&p| self.in_fit(p)) {
            return Err(Error::invalid("p grid has no point inside the fit range"));
        }
        Ok(())
    }

    pub fn in_fit(&self, p: f64) -> bool {
        p >= self.p_fit_min && p <= self.p_fit_max && !(p > self.p_exclude.0 && p < self.p_exclude.1)
    }

    /// Ladder sorted ascending, ending in an infinite factor.
    pub fn ladder(&self) -> Vec<Gamma> {
        let mut g = self.gamma_grid.clone();
        g.sort_by(|a, b| a.value().total_cmp(&b.value()));
        g.dedup();
        if !g.last().is_some_and(|l| l.is_infinite()) {
            g.push(Gamma::INFINITE);
        }
        g
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Distances {
    pub continuous: f64,
    pub jump: f64,
    pub points: usize,
}

/// Sup-norm distances of the fit-range part of `curve` to both references.
pub fn reference_distances(curve: &LogRatioCurve, config: &ClassifierConfig) -> Result<Distances> {
    let mut dc: f64 = 0.0;
    let mut dj: f64 = 0.0;
    let mut n = 0;
    for pt in curve.points.iter().filter(|pt| config.in_fit(pt.p)) {
        dc = dc.max((pt.logratio - reference_logratio(pt.p, ReferenceKind::Continuous)?).abs());
        dj = dj.max((pt.logratio - reference_logratio(pt.p, ReferenceKind::Jumps)?).abs());
        n += 1;
    }
    if n == 0 {
        return Err(Error::Degenerate("log-ratio curve has no finite point in the fit range".into()));
    }
    Ok(Distances { continuous: dc, jump: dj, points: n })
}

/// Verdict from the two distances.
pub fn decide(d: &Distances, config: &ClassifierConfig) -> Verdict {
    if d.continuous <= config.delta && d.continuous <= d.jump {
        Verdict::ContinuousSemimartingale
    } else if d.jump <= config.delta && d.jump < d.continuous {
        Verdict::SemimartingaleWithJumps
    } else if d.continuous.min(d.jump) > config.delta_reject {
        Verdict::NotSemimartingale
    } else {
        Verdict::Inconclusive
    }
}

fn sup_change(a: &LogRatioCurve, b: &LogRatioCurve, config: &ClassifierConfig) -> f64 {
    let mut worst: f64 = 0.0;
    for &p in config.p_grid.iter().filter(|&&p| config.in_fit(p)) {
        match (a.value_at(p), b.value_at(p)) {
            (Some(x), Some(y)) => worst = worst.max((x - y).abs()),
            (None, None) => {}
            _ => return f64::INFINITY,
        }
    }
    worst
}

/// Index of the first curve within `eps_stab` of every later curve.
pub fn stabilization_index(curves: &[LogRatioCurve], config: &ClassifierConfig) -> usize {
    (0..curves.len())
        .find(|&k| curves[k + 1..].iter().all(|later| sup_change(&curves[k], later, config) < config.eps_stab))
        .unwrap_or(curves.len().saturating_sub(1))
}

/// Position of an interior maximum exceeding both end values by the margin.
pub fn interior_maximum(points: &[(usize, f64)], margin: f64) -> Option<(usize, f64)> {
    if points.len() < 3 {
        return None;
    }
    let (first, last) = (points[0].1, points[points.len() - 1].1);
    let (m, v) = points[1..points.len() - 1].iter().copied().max_by(|a, b| a.1.total_cmp(&b.1))?;
    (v >= first * (1.0 + margin) && v >= last * (1.0 + margin)).then_some((m, v))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShapeWarning {
    pub m: usize,
    pub value: f64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassificationReport {
    pub verdict: Verdict,
    pub ratio4: f64,
    pub dist_continuous: f64,
    pub dist_jump: f64,
    pub gamma_star: Gamma,
    pub omitted_points: usize,
    pub segments_used: usize,
    pub stabilized_curve: LogRatioCurve,
    pub shape_warning: Option<ShapeWarning>,
    pub config: ClassifierConfig,
}

pub fn classify(series: &TimeSeries, segs: &SegmentSet, config: &ClassifierConfig) -> Result<ClassificationReport> {
    config.validate()?;
    let ladder = config.ladder();
    let curves = logratio_curves(series, segs, config.m_base, &ladder, &config.p_grid, config.trunc_multiplier)?;
    let k = stabilization_index(&curves, config);
    let curve = curves[k].clone();
    let gamma_star = ladder[k];
    let d = reference_distances(&curve, config)?;
    let verdict = decide(&d, config);
    let ratio4 = ratio4_statistic(series, segs, gamma_star, config.m_min, config.trunc_multiplier)?;

    let shape_warning = if config.shape_m_grid.is_empty() {
        None
    } else {
        let two = match variation_curve(series, segs, 2.0, gamma_star, &config.shape_m_grid, config.trunc_multiplier) {
            Err(Error::NoAdmissibleSegment { .. }) => None,
            other => Some(other?),
        };
        two.and_then(|two| {
            let pts: Vec<(usize, f64)> = two.points.iter().map(|p| (p.m, p.value)).collect();
            interior_maximum(&pts, config.shape_margin).map(|(m, value)| ShapeWarning {
                m,
                value,
                message: format!(
                "2-variation has an interior maximum at M={m}, not expected for a discretely observed semimartingale"
            ),
            })
        })
    };

    Ok(ClassificationReport {
        verdict,
        ratio4,
        dist_continuous: d.continuous,
        dist_jump: d.jump,
        gamma_star,
        omitted_points: curve.omitted.len(),
        segments_used: segs.admitting(2 * config.m_base).len(),
        stabilized_curve: curve,
        shape_warning,
        config: config.clone(),
    })
}
