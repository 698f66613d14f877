//! Piecewise-linear function algebra and piecewise-exponential densities.
//!
//! Minorants of nonlinearities are upper or lower envelopes of line families;
//! hulls of modified potentials are piecewise-linear lower bounds built from
//! tangents; `exp(-W)` of a piecewise-linear `W` is a piecewise-exponential
//! density that normalizes in closed form and samples by exact segment-wise
//! inversion.

use crate::bounds::LinearFn;
use crate::error::{Error, Result, Tail};
use crate::extended::Interval;
use crate::model::{Curvature, Nonlinearity, ShapeClass};
use crate::numeric::{self, FD_STEP};
use crate::samplers::RandomSource;

/// Breakpoints closer than this merge into one.
pub const BREAKPOINT_TOL: f64 = 1e-9;
/// Adjacent segments whose slope and intercept agree within this merge.
const COLLINEAR_TOL: f64 = 1e-12;

/// Whether an envelope is the pointwise maximum or minimum of its lines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvelopeMode {
    Max,
    Min,
}

/// A piecewise-linear function on the real line: `cuts` are the strictly
/// increasing interior breakpoints and `pieces[i]` is the line on the `i`-th
/// interval (`pieces.len() == cuts.len() + 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinearFn {
    cuts: Vec<f64>,
    pieces: Vec<LinearFn>,
}

impl PiecewiseLinearFn {
    pub fn from_line(line: LinearFn) -> Self {
        PiecewiseLinearFn {
            cuts: Vec::new(),
            pieces: vec![line],
        }
    }

    /// Builds from raw parts, canonicalizing: merges collinear neighbours and
    /// elides zero-width middle pieces.
    pub fn new(cuts: Vec<f64>, pieces: Vec<LinearFn>) -> Result<Self> {
        if pieces.len() != cuts.len() + 1 {
            return Err(Error::Contract(format!(
                "piecewise-linear function needs one more piece ({}) than cuts ({})",
                pieces.len(),
                cuts.len()
            )));
        }
        if cuts.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Contract(
                "breakpoints must be strictly increasing".into(),
            ));
        }
        let mut out = PiecewiseLinearFn { cuts, pieces };
        out.canonicalize();
        Ok(out)
    }

    fn canonicalize(&mut self) {
        let mut cuts: Vec<f64> = Vec::with_capacity(self.cuts.len());
        let mut pieces = vec![self.pieces[0]];
        for (i, &c) in self.cuts.iter().enumerate() {
            let next = self.pieces[i + 1];
            let last = *pieces.last().unwrap();
            let collinear = (next.slope - last.slope).abs() <= COLLINEAR_TOL
                && (next.intercept - last.intercept).abs() <= COLLINEAR_TOL;
            if collinear {
                continue;
            }
            if cuts.last().is_some_and(|&p| c - p <= BREAKPOINT_TOL) {
                // Zero-width middle piece: the new line takes over directly.
                *pieces.last_mut().unwrap() = next;
                continue;
            }
            cuts.push(c);
            pieces.push(next);
        }
        self.cuts = cuts;
        self.pieces = pieces;
    }

    pub fn cuts(&self) -> &[f64] {
        &self.cuts
    }

    pub fn pieces(&self) -> &[LinearFn] {
        &self.pieces
    }

    /// The line in effect at `x` (right-continuous at breakpoints).
    pub fn piece_at(&self, x: f64) -> &LinearFn {
        let idx = self.cuts.partition_point(|&c| c <= x);
        &self.pieces[idx]
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.piece_at(x).eval(x)
    }

    /// Segments as `(lo, hi, line)` triples with infinite outer endpoints.
    pub fn segments(&self) -> Vec<(f64, f64, LinearFn)> {
        let mut out = Vec::with_capacity(self.pieces.len());
        for (i, &piece) in self.pieces.iter().enumerate() {
            let lo = if i == 0 {
                f64::NEG_INFINITY
            } else {
                self.cuts[i - 1]
            };
            let hi = if i == self.cuts.len() {
                f64::INFINITY
            } else {
                self.cuts[i]
            };
            out.push((lo, hi, piece));
        }
        out
    }

    pub fn leftmost_slope(&self) -> f64 {
        self.pieces.first().unwrap().slope
    }

    pub fn rightmost_slope(&self) -> f64 {
        self.pieces.last().unwrap().slope
    }
}

/// Upper (`Max`) or lower (`Min`) envelope of a family of lines, optionally
/// clamped by a constant level included in the family.
pub fn envelope_combine(
    lines: &[LinearFn],
    mode: EnvelopeMode,
    clamp: Option<f64>,
) -> Result<PiecewiseLinearFn> {
    let mut family: Vec<LinearFn> = lines.to_vec();
    if let Some(level) = clamp {
        family.push(LinearFn::constant(level));
    }
    if family.is_empty() {
        return Err(Error::Contract("envelope of an empty line family".into()));
    }
    // A minimum is the negated maximum of negated lines.
    let negate = mode == EnvelopeMode::Min;
    if negate {
        for l in &mut family {
            l.slope = -l.slope;
            l.intercept = -l.intercept;
        }
    }
    let mut env = upper_envelope(family);
    if negate {
        for l in &mut env.pieces {
            l.slope = -l.slope;
            l.intercept = -l.intercept;
        }
    }
    Ok(env)
}

/// Upper envelope of lines by the monotone-chain sweep over slopes.
fn upper_envelope(mut family: Vec<LinearFn>) -> PiecewiseLinearFn {
    family.sort_by(|a, b| {
        a.slope
            .partial_cmp(&b.slope)
            .unwrap()
            .then(a.intercept.partial_cmp(&b.intercept).unwrap())
    });
    // Among (near-)equal slopes only the highest intercept can appear on top.
    family.dedup_by(|next, kept| {
        if (next.slope - kept.slope).abs() <= COLLINEAR_TOL {
            if next.intercept > kept.intercept {
                *kept = *next;
            }
            true
        } else {
            false
        }
    });
    let mut hull: Vec<LinearFn> = Vec::with_capacity(family.len());
    let mut cuts: Vec<f64> = Vec::new();
    for line in family {
        loop {
            match hull.last() {
                None => break,
                Some(top) => {
                    let x = line
                        .intersect(top)
                        .expect("distinct slopes after dedup always intersect");
                    if let Some(&last_cut) = cuts.last() {
                        if x <= last_cut {
                            hull.pop();
                            cuts.pop();
                            continue;
                        }
                    }
                    cuts.push(x);
                    break;
                }
            }
        }
        hull.push(line);
    }
    let mut out = PiecewiseLinearFn { cuts, pieces: hull };
    out.canonicalize();
    out
}

/// All interior breakpoints of the given piecewise-linear functions, merged,
/// deduplicated and ascending.
pub fn intersection_abscissas(fns: &[&PiecewiseLinearFn]) -> Vec<f64> {
    let mut out: Vec<f64> = fns.iter().flat_map(|f| f.cuts.iter().copied()).collect();
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    out.dedup_by(|a, b| (*a - *b).abs() <= BREAKPOINT_TOL);
    out
}

/// Minorant of a non-monotonic convex or concave nonlinearity over the
/// support set (ascending). With two simple estimates the lines are chords
/// over support pairs inside `[x1, x2]` and tangents at points outside; with
/// fewer estimates the construction is all tangents clamped by the
/// observation level.
pub fn gars_minorant_nonmonotonic(
    nl: &Nonlinearity,
    y: f64,
    support: &[f64],
) -> Result<PiecewiseLinearFn> {
    let estimates = nl.global_estimates(y)?;
    gars_minorant_nonmonotonic_with(nl, y, &estimates, support)
}

pub(crate) fn gars_minorant_nonmonotonic_with(
    nl: &Nonlinearity,
    y: f64,
    estimates: &[f64],
    support: &[f64],
) -> Result<PiecewiseLinearFn> {
    let curvature = match nl.shape_class()? {
        ShapeClass::NonMonotonic(c) => c,
        other => {
            return Err(Error::Contract(format!(
                "non-monotonic construction on a {other:?} nonlinearity"
            )))
        }
    };
    let mode = combine_mode(curvature);
    if estimates.len() < 2 {
        return all_tangent_minorant(nl, y, support, mode);
    }
    let (e_lo, e_hi) = (estimates[0], estimates[1]);
    for e in [e_lo, e_hi] {
        if !support.iter().any(|&s| (s - e).abs() <= 1e-7) {
            return Err(Error::Contract(format!(
                "support set is missing the simple estimate {e}"
            )));
        }
    }
    let inside = |s: f64| s >= e_lo - BREAKPOINT_TOL && s <= e_hi + BREAKPOINT_TOL;
    let mut lines = Vec::new();
    for w in support.windows(2) {
        if inside(w[0]) && inside(w[1]) {
            lines.push(chord(nl, w[0], w[1]));
        }
    }
    for &s in support {
        if !inside(s) {
            lines.push(tangent(nl, s));
        }
    }
    envelope_combine(&lines, mode, None)
}

/// Minorant of a monotonic nonlinearity: chords over support pairs inside the
/// one-sided interval around the simple estimate, tangents at points outside,
/// plus a constant extension of the outermost curve value on the interval's
/// infinite side. Without a simple estimate the construction is all tangents
/// clamped by `y`.
pub fn gars_minorant_monotonic(
    nl: &Nonlinearity,
    y: f64,
    support: &[f64],
) -> Result<PiecewiseLinearFn> {
    let estimates = nl.global_estimates(y)?;
    gars_minorant_monotonic_with(nl, y, &estimates, support)
}

pub(crate) fn gars_minorant_monotonic_with(
    nl: &Nonlinearity,
    y: f64,
    estimates: &[f64],
    support: &[f64],
) -> Result<PiecewiseLinearFn> {
    let (toward_minus_inf, curvature) = match nl.shape_class()? {
        ShapeClass::MonotonicCaseA(c) => (true, c),
        ShapeClass::MonotonicCaseB(c) => (false, c),
        other => {
            return Err(Error::Contract(format!(
                "monotonic construction on a {other:?} nonlinearity"
            )))
        }
    };
    let mode = combine_mode(curvature);
    let Some(&estimate) = estimates.first() else {
        return all_tangent_minorant(nl, y, support, mode);
    };
    if !support.iter().any(|&s| (s - estimate).abs() <= 1e-7) {
        return Err(Error::Contract(format!(
            "support set is missing the simple estimate {estimate}"
        )));
    }
    let inside = |s: f64| {
        if toward_minus_inf {
            s <= estimate + BREAKPOINT_TOL
        } else {
            s >= estimate - BREAKPOINT_TOL
        }
    };
    let mut lines = Vec::new();
    for w in support.windows(2) {
        if inside(w[0]) && inside(w[1]) {
            lines.push(chord(nl, w[0], w[1]));
        }
    }
    for &s in support {
        if !inside(s) {
            lines.push(tangent(nl, s));
        }
    }
    // Flat extension on the infinite side of the interval.
    let flat_at = if toward_minus_inf {
        support[0]
    } else {
        support[support.len() - 1]
    };
    lines.push(LinearFn::constant(nl.eval(flat_at)));
    envelope_combine(&lines, mode, None)
}

/// Minorant for one term of an extended model, dispatching on shape. Linear
/// nonlinearities are their own exact minorant.
pub fn gars_minorant(nl: &Nonlinearity, y: f64, support: &[f64]) -> Result<PiecewiseLinearFn> {
    let estimates = nl.global_estimates(y)?;
    gars_minorant_with(nl, y, &estimates, support)
}

/// As [`gars_minorant`] with the simple estimates precomputed, so callers
/// that rebuild on every rejection skip the root finding.
pub fn gars_minorant_with(
    nl: &Nonlinearity,
    y: f64,
    estimates: &[f64],
    support: &[f64],
) -> Result<PiecewiseLinearFn> {
    if support.len() < 2 {
        return Err(Error::Contract(
            "support set needs at least two points".into(),
        ));
    }
    if nl.is_linear() {
        let (slope, intercept) = nl.branches()[0].tangent_at(0.0);
        return Ok(PiecewiseLinearFn::from_line(LinearFn { slope, intercept }));
    }
    match nl.shape_class()? {
        ShapeClass::NonMonotonic(_) => gars_minorant_nonmonotonic_with(nl, y, estimates, support),
        _ => gars_minorant_monotonic_with(nl, y, estimates, support),
    }
}

fn combine_mode(curvature: Curvature) -> EnvelopeMode {
    match curvature {
        Curvature::Convex => EnvelopeMode::Max,
        Curvature::Concave => EnvelopeMode::Min,
    }
}

fn chord(nl: &Nonlinearity, a: f64, b: f64) -> LinearFn {
    LinearFn::through(a, nl.eval(a), b, nl.eval(b))
}

fn tangent(nl: &Nonlinearity, s: f64) -> LinearFn {
    let (slope, intercept) = nl.branch_at(s).tangent_at(s);
    LinearFn { slope, intercept }
}

/// All-tangent construction used when no simple estimate exists (or both
/// coincide): tangents at every support point, clamped by the observation
/// level so the residual never changes sign.
fn all_tangent_minorant(
    nl: &Nonlinearity,
    y: f64,
    support: &[f64],
    mode: EnvelopeMode,
) -> Result<PiecewiseLinearFn> {
    let lines: Vec<LinearFn> = support.iter().map(|&s| tangent(nl, s)).collect();
    envelope_combine(&lines, mode, Some(y))
}

/// Piecewise-linear lower hull of a function that is convex between
/// consecutive knots: on each interior interval the maximum of the tangents
/// at its two endpoints, and the outermost tangents on the tails. Tangent
/// slopes come from one-sided three-point differences, so kinks at the knots
/// stay below the function.
pub fn build_hull(f: &dyn Fn(f64) -> f64, knots: &[f64]) -> Result<PiecewiseLinearFn> {
    if knots.is_empty() {
        return Err(Error::Contract(
            "hull construction needs at least one knot".into(),
        ));
    }
    debug_assert!(
        knots.windows(2).all(|w| w[0] < w[1]),
        "knots must be ascending"
    );
    let knot_values: Vec<f64> = knots.iter().map(|&u| f(u)).collect();
    // The difference step must stay inside the convex piece on its side of
    // the knot, so it shrinks with the gap to the next knot.
    let tangent_side = |i: usize, side: f64, gap: f64| -> LinearFn {
        let u = knots[i];
        let fu = knot_values[i];
        let h = FD_STEP.min(0.25 * gap).max(1e-10);
        let s = side.signum();
        let slope = (-3.0 * fu + 4.0 * f(u + s * h) - f(u + 2.0 * s * h)) / (2.0 * s * h);
        LinearFn {
            slope,
            intercept: fu - slope * u,
        }
    };
    let mut cuts: Vec<f64> = vec![knots[0]];
    let mut pieces: Vec<LinearFn> = vec![tangent_side(0, -1.0, f64::INFINITY)];
    for (i, w) in knots.windows(2).enumerate() {
        let (u0, u1) = (w[0], w[1]);
        let gap = u1 - u0;
        let t0 = tangent_side(i, 1.0, gap);
        let t1 = tangent_side(i + 1, -1.0, gap);
        // Convexity on [u0, u1] puts the tangent at u0 on top near u0 and the
        // tangent at u1 on top near u1; they cross at most once inside.
        match t0.intersect(&t1) {
            Some(x) if x > u0 + BREAKPOINT_TOL && x < u1 - BREAKPOINT_TOL => {
                pieces.push(t0);
                cuts.push(x);
                pieces.push(t1);
                cuts.push(u1);
            }
            _ => {
                let mid = 0.5 * (u0 + u1);
                let keep = if t0.eval(mid) >= t1.eval(mid) { t0 } else { t1 };
                pieces.push(keep);
                cuts.push(u1);
            }
        }
    }
    pieces.push(tangent_side(knots.len() - 1, 1.0, f64::INFINITY));
    PiecewiseLinearFn::new(cuts, pieces)
}

/// One segment of a piecewise-exponential density: the restriction of
/// `exp(-(slope x + intercept))` to `[lo, hi]`.
#[derive(Debug, Clone, Copy)]
pub struct ExpSegment {
    pub lo: f64,
    pub hi: f64,
    pub line: LinearFn,
    log_mass: f64,
}

/// A normalized density proportional to `exp(-W(x))` for piecewise-linear
/// `W`, with exact segment-wise inversion sampling.
#[derive(Debug, Clone)]
pub struct PiecewiseExpDensity {
    segments: Vec<ExpSegment>,
    log_normalizer: f64,
    cumulative: Vec<f64>,
    approximate: bool,
}

/// Options for density normalization.
#[derive(Debug, Clone, Copy, Default)]
pub struct NormalizeOptions {
    /// Replace a near-flat non-integrable tail by this slope instead of
    /// failing. Densities built under the fallback are flagged approximate,
    /// since the tilted tail may rise above the original hull.
    pub epsilon_slope: Option<f64>,
}

impl PiecewiseExpDensity {
    /// Normalizes `exp(-W)` over the whole real line.
    pub fn from_hull(w: &PiecewiseLinearFn) -> Result<Self> {
        Self::from_hull_with(w, &NormalizeOptions::default())
    }

    pub fn from_hull_with(w: &PiecewiseLinearFn, opts: &NormalizeOptions) -> Result<Self> {
        let mut segments = w.segments();
        let mut approximate = false;
        let left = segments.first().unwrap().2.slope;
        if left >= 0.0 {
            match opts.epsilon_slope {
                Some(eps) if left.abs() < eps => {
                    log::warn!("improper left tail (slope {left}); applying epsilon slope");
                    let seg = segments.first_mut().unwrap();
                    let x0 = seg.1;
                    let v0 = seg.2.eval(x0);
                    seg.2 = LinearFn {
                        slope: -eps,
                        intercept: v0 + eps * x0,
                    };
                    approximate = true;
                }
                _ => {
                    return Err(Error::ImproperEnvelope {
                        side: Tail::Left,
                        slope: left,
                    })
                }
            }
        }
        let right = segments.last().unwrap().2.slope;
        if right <= 0.0 {
            match opts.epsilon_slope {
                Some(eps) if right.abs() < eps => {
                    log::warn!("improper right tail (slope {right}); applying epsilon slope");
                    let seg = segments.last_mut().unwrap();
                    let x0 = seg.0;
                    let v0 = seg.2.eval(x0);
                    seg.2 = LinearFn {
                        slope: eps,
                        intercept: v0 - eps * x0,
                    };
                    approximate = true;
                }
                _ => {
                    return Err(Error::ImproperEnvelope {
                        side: Tail::Right,
                        slope: right,
                    })
                }
            }
        }
        let mut d = Self::from_segments(segments)?;
        d.approximate = approximate;
        Ok(d)
    }

    /// Normalizes `exp(-W)` over an explicit ascending segment list (supports
    /// bounded domains). Zero-width segments carry no mass and are dropped.
    pub fn from_segments(parts: Vec<(f64, f64, LinearFn)>) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::Contract("density needs at least one segment".into()));
        }
        let mut segments = Vec::with_capacity(parts.len());
        for (lo, hi, line) in parts {
            if !(lo < hi) {
                continue;
            }
            let log_mass = segment_log_mass(lo, hi, &line)?;
            segments.push(ExpSegment {
                lo,
                hi,
                line,
                log_mass,
            });
        }
        if segments.is_empty() {
            return Err(Error::Contract(
                "density has no segment of positive width".into(),
            ));
        }
        let log_normalizer =
            numeric::log_sum_exp(&segments.iter().map(|s| s.log_mass).collect::<Vec<_>>());
        if !log_normalizer.is_finite() {
            return Err(Error::Numeric(format!(
                "degenerate normalizer: log mass {log_normalizer}"
            )));
        }
        let mut cumulative = Vec::with_capacity(segments.len());
        let mut acc = 0.0;
        for s in &segments {
            acc += (s.log_mass - log_normalizer).exp();
            cumulative.push(acc);
        }
        // Guard the final cumulative value against rounding.
        *cumulative.last_mut().unwrap() = 1.0;
        Ok(PiecewiseExpDensity {
            segments,
            log_normalizer,
            cumulative,
            approximate: false,
        })
    }

    pub fn segments(&self) -> &[ExpSegment] {
        &self.segments
    }

    /// `log integral exp(-W)` before normalization.
    pub fn log_normalizer(&self) -> f64 {
        self.log_normalizer
    }

    /// Set when an epsilon-slope fallback modified a tail; exactness of
    /// rejection sampling against the original hull is then not guaranteed.
    pub fn is_approximate(&self) -> bool {
        self.approximate
    }

    /// Normalized mass of segment `i`.
    pub fn segment_mass(&self, i: usize) -> f64 {
        let prev = if i == 0 { 0.0 } else { self.cumulative[i - 1] };
        self.cumulative[i] - prev
    }

    /// Normalized density at `x` (zero outside all segments).
    pub fn pdf(&self, x: f64) -> f64 {
        for s in &self.segments {
            if x >= s.lo && x <= s.hi {
                return (-s.line.eval(x) - self.log_normalizer).exp();
            }
        }
        0.0
    }

    /// Draws one exact sample: a segment chosen by cumulative mass, the
    /// segment exponential inverted analytically.
    pub fn sample(&self, rng: &mut RandomSource) -> f64 {
        let u = rng.uniform();
        let idx = self
            .cumulative
            .partition_point(|&c| c < u)
            .min(self.segments.len() - 1);
        let seg = &self.segments[idx];
        let v = rng.uniform();
        invert_segment(seg, v)
    }
}

/// `log integral_{lo}^{hi} exp(-(a x + b)) dx`, handling infinite endpoints
/// and the `a -> 0` limit. Exponents are anchored at the segment's dominant
/// endpoint so large `|a| (hi - lo)` cannot overflow.
fn segment_log_mass(lo: f64, hi: f64, line: &LinearFn) -> Result<f64> {
    let a = line.slope;
    let b = line.intercept;
    if lo == f64::NEG_INFINITY {
        if a >= 0.0 {
            return Err(Error::ImproperEnvelope {
                side: Tail::Left,
                slope: a,
            });
        }
        return Ok(-(a * hi + b) - (-a).ln());
    }
    if hi == f64::INFINITY {
        if a <= 0.0 {
            return Err(Error::ImproperEnvelope {
                side: Tail::Right,
                slope: a,
            });
        }
        return Ok(-(a * lo + b) - a.ln());
    }
    let width = hi - lo;
    let dominant = if a > 0.0 { lo } else { hi };
    let log_front = -(a * dominant + b);
    let taw = a.abs() * width;
    if taw < 1e-12 {
        // integral ~ width exp(log_front) (1 - taw/2)
        return Ok(log_front + width.ln() + (-0.5 * taw).ln_1p());
    }
    // integral = exp(log_front) (1 - exp(-taw)) / |a|
    Ok(log_front + (-(-taw).exp_m1()).ln() - a.abs().ln())
}

/// Inverse CDF of the exponential restricted to a segment, evaluated at `v`.
fn invert_segment(seg: &ExpSegment, v: f64) -> f64 {
    let a = seg.line.slope;
    if seg.lo == f64::NEG_INFINITY {
        // F(x) = exp(-a (x - hi)) with a < 0.
        return seg.hi + (v.ln() / -a).min(0.0);
    }
    if seg.hi == f64::INFINITY {
        // 1 - F(x) = exp(-a (x - lo)) with a > 0.
        return seg.lo + (-(1.0 - v).ln() / a).max(0.0);
    }
    let width = seg.hi - seg.lo;
    if a.abs() * width < 1e-12 {
        return seg.lo + v * width;
    }
    let x = if a > 0.0 {
        // F(x) = (1 - exp(-a (x - lo))) / (1 - exp(-a width))
        let q = v * (-a * width).exp_m1();
        seg.lo - q.ln_1p() / a
    } else {
        // Mirror from the upper endpoint for stability when a < 0.
        let alpha = -a;
        let q = (1.0 - v) * (-alpha * width).exp_m1();
        seg.hi + q.ln_1p() / alpha
    };
    x.clamp(seg.lo, seg.hi)
}

/// Restriction of `exp(-W)` to a finite window, for bounded-domain targets.
pub fn density_on(w: &PiecewiseLinearFn, window: Interval) -> Result<PiecewiseExpDensity> {
    let (lo, hi) = window.clip(f64::MAX / 4.0);
    let parts = w
        .segments()
        .into_iter()
        .filter_map(|(s_lo, s_hi, line)| {
            let a = s_lo.max(lo);
            let b = s_hi.min(hi);
            (a < b).then_some((a, b, line))
        })
        .collect();
    PiecewiseExpDensity::from_segments(parts)
}
