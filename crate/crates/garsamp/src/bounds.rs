//! Lower bounds on the system potential (upper bounds on the likelihood).
//!
//! Each nonlinearity is replaced on a search interval by a minorant line
//! whose residual never exceeds the true residual in magnitude and never
//! changes its sign. Minimizing the resulting modified potential yields a
//! certified lower bound. On top of that sit the iterative subdivision
//! refinement, the closed form for quadratic potentials, transform-based
//! bounds for non-quadratic joint potentials, and a two-tangent bound for
//! convex marginals.

use crate::error::{Error, Result};
use crate::extended::{Extended, Interval, DEFAULT_HORIZON};
use crate::model::{NonlinearBranch, ObservationModel};
use crate::numeric::{self, FD_STEP};

/// A line `a x + b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFn {
    pub slope: f64,
    pub intercept: f64,
}

impl LinearFn {
    pub fn new(slope: f64, intercept: f64) -> Self {
        LinearFn { slope, intercept }
    }

    pub fn constant(value: f64) -> Self {
        LinearFn {
            slope: 0.0,
            intercept: value,
        }
    }

    /// Line through `(x0, y0)` and `(x1, y1)`.
    pub fn through(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        let slope = (y1 - y0) / (x1 - x0);
        LinearFn {
            slope,
            intercept: y0 - slope * x0,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }

    /// Abscissa where two non-parallel lines meet.
    pub fn intersect(&self, other: &LinearFn) -> Option<f64> {
        let da = self.slope - other.slope;
        if da == 0.0 {
            return None;
        }
        Some((other.intercept - self.intercept) / da)
    }
}

/// Per-region outcome of a bound computation.
#[derive(Debug, Clone)]
pub struct RegionBound {
    pub region: usize,
    pub gamma: f64,
    pub minimizer: f64,
    pub lines: Vec<LinearFn>,
}

/// Result of a bound computation: the global bound and its per-region parts.
#[derive(Debug, Clone)]
pub struct BoundReport {
    pub method: &'static str,
    pub gamma: f64,
    pub regions: Vec<RegionBound>,
    pub iterations: usize,
}

impl BoundReport {
    fn from_regions(method: &'static str, regions: Vec<RegionBound>, iterations: usize) -> Self {
        let gamma = regions
            .iter()
            .map(|r| r.gamma)
            .fold(f64::INFINITY, f64::min);
        BoundReport {
            method,
            gamma,
            regions,
            iterations,
        }
    }

    /// Post-hoc soundness check: `gamma <= grid minimum + tol` of the true
    /// observation potential over the given window.
    pub fn check_sound(
        &self,
        model: &ObservationModel,
        lo: f64,
        hi: f64,
        points: usize,
        tol: f64,
    ) -> Result<()> {
        let mut grid_min = f64::INFINITY;
        for &x in numeric::linspace(lo, hi, points).iter() {
            if let Ok(v) = model.observation_potential(x) {
                grid_min = grid_min.min(v);
            }
        }
        if self.gamma <= grid_min + tol {
            Ok(())
        } else {
            Err(Error::Numeric(format!(
                "bound {} = {} exceeds grid minimum {} of the potential",
                self.method, self.gamma, grid_min
            )))
        }
    }
}

/// Which endpoint of the interval anchors the chord.
fn anchor_is_lower(branch: &NonlinearBranch) -> bool {
    // Case 1 (d1*d2 >= 0): chord from the interval minimum.
    // Case 2 (d1*d2 <= 0): chord from the interval maximum.
    // Linear branches (d2 = 0) behave identically either way.
    i32::from(branch.monotone_sign()) * i32::from(branch.curvature_sign()) >= 0
}

/// Builds the minorant line for one observation on the interval `interval`.
///
/// `est` is the simple estimate of the branch (possibly a sentinel). The line
/// is the chord between the anchor endpoint of the interval and the estimate
/// point on the curve; it degenerates to the tangent at the estimate when the
/// two coincide, and to the horizontal asymptote when the estimate is a
/// sentinel.
pub fn build_minorant_line(
    branch: &NonlinearBranch,
    y: f64,
    interval: Interval,
    est: Extended,
) -> Result<LinearFn> {
    let coincide_tol: f64 = 1e-12;
    match est {
        Extended::Finite(e) => {
            let anchor = if anchor_is_lower(branch) {
                interval.lo
            } else {
                interval.hi
            };
            match anchor {
                Extended::Finite(a) => {
                    if (a - e).abs() <= coincide_tol.max(1e-9 * e.abs()) {
                        let (slope, intercept) = branch.tangent_at(e);
                        Ok(LinearFn { slope, intercept })
                    } else {
                        Ok(LinearFn::through(a, branch.eval(a), e, branch.eval(e)))
                    }
                }
                // An infinite anchor flattens the chord onto the observation
                // level, which trivially satisfies both minorant conditions.
                _ => Ok(LinearFn::constant(y)),
            }
        }
        sentinel => {
            if interval.is_degenerate() {
                let v = interval
                    .lo
                    .finite()
                    .expect("degenerate interval has finite endpoints");
                return Ok(LinearFn::constant(branch.eval(v)));
            }
            // Horizontal asymptote on the sentinel side.
            let far = sentinel.clip(DEFAULT_HORIZON);
            let v = branch.eval(far);
            if !v.is_finite() {
                return Err(Error::Numeric(format!(
                    "branch has no finite horizontal asymptote toward {sentinel}"
                )));
            }
            Ok(LinearFn::constant(v))
        }
    }
}

/// Verifies the two minorant conditions on a 1000-point grid over `interval`:
/// `|y - r| <= |y - g|` and `(y - r)(y - g) >= 0`.
pub fn check_minorant(
    line: &LinearFn,
    branch: &NonlinearBranch,
    y: f64,
    interval: Interval,
) -> bool {
    let (lo, hi) = interval.clip(DEFAULT_HORIZON);
    let tol = 1e-9;
    for &x in numeric::linspace(lo, hi, 1000).iter() {
        let rg = y - branch.eval(x);
        let rr = y - line.eval(x);
        if rr.abs() > rg.abs() + tol * (1.0 + rg.abs()) {
            return false;
        }
        if rr * rg < -tol * (1.0 + rg.abs()) {
            return false;
        }
    }
    true
}

/// Golden-section minimization of a convex (or unimodal) function.
pub fn minimize_convex_1d(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64) -> Result<(f64, f64)> {
    numeric::golden_section_min(f, lo, hi)
}

/// Options shared by the bound computations.
#[derive(Debug, Clone, Copy)]
pub struct BoundOptions {
    /// Include the additive constant `c_n` in reported bounds.
    pub include_constant: bool,
    /// Horizon used to clip sentinel interval endpoints where a finite value
    /// is arithmetically required.
    pub horizon: f64,
    /// Grid size for the non-convex fallback minimizer.
    pub fallback_grid: usize,
}

impl Default for BoundOptions {
    fn default() -> Self {
        BoundOptions {
            include_constant: false,
            horizon: DEFAULT_HORIZON,
            fallback_grid: 10_000,
        }
    }
}

/// The modified potential `sum_i V_i(y_i - r_i(x))` for a family of lines.
fn modified_potential<'a>(
    model: &'a ObservationModel,
    lines: &[LinearFn],
    constant: f64,
) -> impl Fn(f64) -> f64 + 'a {
    let y = model.observations().to_vec();
    let lines = lines.to_vec();
    move |x: f64| {
        let mut v = constant;
        for i in 0..y.len() {
            v += model.potential(i).eval(y[i] - lines[i].eval(x));
        }
        v
    }
}

fn all_marginals_convex(model: &ObservationModel) -> bool {
    (0..model.len()).all(|i| model.potential(i).is_convex())
}

/// Minimizes the modified potential over `[lo, hi]`, using golden section
/// when convexity is certified and a dense grid with refinement otherwise.
fn minimize_modified(
    model: &ObservationModel,
    lines: &[LinearFn],
    lo: f64,
    hi: f64,
    opts: &BoundOptions,
) -> Result<(f64, f64)> {
    let constant = if opts.include_constant {
        model.constant()
    } else {
        0.0
    };
    let f = modified_potential(model, lines, constant);
    if all_marginals_convex(model) {
        minimize_convex_1d(&f, lo, hi)
    } else {
        numeric::grid_refine_min(&f, lo, hi, opts.fallback_grid)
    }
}

/// Minorant lines for all observations of region `j` on `interval`, with
/// simple estimates clamped into the interval (the subdivision rule).
fn region_lines(
    model: &ObservationModel,
    j: usize,
    interval: Interval,
    estimates: &[Extended],
    clamp_into: Option<(f64, f64)>,
) -> Result<Vec<LinearFn>> {
    let mut lines = Vec::with_capacity(model.len());
    for (i, &estimate) in estimates.iter().enumerate() {
        let branch = model.branch_in_region(i, j)?;
        let est = match (estimate, clamp_into) {
            (Extended::Finite(e), Some((lo, hi))) => Extended::Finite(e.clamp(lo, hi)),
            (s, Some((lo, hi))) => {
                // Sentinels clamp to the near endpoint of the subinterval.
                match s {
                    Extended::NegInf => Extended::Finite(lo),
                    Extended::PosInf => Extended::Finite(hi),
                    Extended::Finite(_) => unreachable!(),
                }
            }
            (e, None) => e,
        };
        lines.push(build_minorant_line(
            branch,
            model.observations()[i],
            interval,
            est,
        )?);
    }
    Ok(lines)
}

/// Bounding method 1: per region, build minorant lines on the simple-estimate
/// interval and minimize the modified potential.
pub fn bm1_bound(model: &ObservationModel, opts: &BoundOptions) -> Result<BoundReport> {
    let mut regions = Vec::new();
    for j in 0..model.region_count() {
        regions.push(bm1_region(model, j, opts)?);
    }
    Ok(BoundReport::from_regions("bm1", regions, 0))
}

fn bm1_region(model: &ObservationModel, j: usize, opts: &BoundOptions) -> Result<RegionBound> {
    let est = model.simple_estimates(j)?;
    let interval = match est.search_interval() {
        Ok(i) => i,
        Err(Error::DegenerateInterval { .. }) => {
            return degenerate_region_bound(model, j, est.estimates[0], opts)
        }
        Err(e) => return Err(e),
    };
    let lines = region_lines(model, j, interval, &est.estimates, None)?;
    let (lo, hi) = interval.clip(opts.horizon);
    let (x, gamma) = minimize_modified(model, &lines, lo, hi, opts)?;
    Ok(RegionBound {
        region: j,
        gamma,
        minimizer: x,
        lines,
    })
}

/// Bound for a region whose simple estimates are all the same infinite
/// sentinel: the potential decreases monotonically toward that end, so its
/// infimum is the limit value, reached with every nonlinearity replaced by
/// its horizontal asymptote.
fn degenerate_region_bound(
    model: &ObservationModel,
    j: usize,
    side: Extended,
    opts: &BoundOptions,
) -> Result<RegionBound> {
    let far = side.clip(opts.horizon);
    let mut gamma = if opts.include_constant {
        model.constant()
    } else {
        0.0
    };
    let mut lines = Vec::with_capacity(model.len());
    for i in 0..model.len() {
        let branch = model.branch_in_region(i, j)?;
        let asymptote = branch.eval(far);
        if !asymptote.is_finite() {
            return Err(Error::Numeric(format!(
                "branch {i} has no finite asymptote toward {side} in region {j}"
            )));
        }
        gamma += model.potential(i).eval(model.observations()[i] - asymptote);
        lines.push(LinearFn::constant(asymptote));
    }
    Ok(RegionBound {
        region: j,
        gamma,
        minimizer: far,
        lines,
    })
}

/// Rule for choosing the next support point inside the winning subinterval.
#[derive(Debug, Clone, Copy, Default)]
pub enum SplitRule {
    /// Midpoint of the winning subinterval.
    #[default]
    Midpoint,
    /// Fixed fraction of the winning subinterval, in `(0, 1)`.
    Fraction(f64),
}

impl SplitRule {
    fn pick(&self, lo: f64, hi: f64) -> f64 {
        match self {
            SplitRule::Midpoint => 0.5 * (lo + hi),
            SplitRule::Fraction(f) => lo + f.clamp(1e-6, 1.0 - 1e-6) * (hi - lo),
        }
    }
}

/// Bounding method 2 for one region: iteratively subdivide the search
/// interval at `k_max` support points, rebuilding clamped minorants per
/// subinterval. `k_max = 0` reproduces the plain bound for the region.
pub fn bm2_bound(
    model: &ObservationModel,
    j: usize,
    k_max: usize,
    rule: SplitRule,
    opts: &BoundOptions,
) -> Result<BoundReport> {
    let est = model.simple_estimates(j)?;
    let interval = match est.search_interval() {
        Ok(i) => i,
        Err(Error::DegenerateInterval { .. }) => {
            // No interval to subdivide; the asymptote bound is already tight.
            let bound = degenerate_region_bound(model, j, est.estimates[0], opts)?;
            return Ok(BoundReport {
                method: "bm2",
                gamma: bound.gamma,
                regions: vec![bound],
                iterations: 0,
            });
        }
        Err(e) => return Err(e),
    };
    let (lo, hi) = interval.clip(opts.horizon);
    if hi - lo <= 1e-12 {
        // A single-point interval cannot be subdivided.
        let bound = bm1_region(model, j, opts)?;
        return Ok(BoundReport {
            method: "bm2",
            gamma: bound.gamma,
            regions: vec![bound],
            iterations: 0,
        });
    }
    let mut support = vec![lo, hi];
    let mut report = bm2_pass(model, j, &support, &est.estimates, opts)?;
    for _ in 0..k_max {
        let (win_lo, win_hi) = report.1;
        if win_hi - win_lo <= 1e-12 {
            break;
        }
        let s_star = rule.pick(win_lo, win_hi);
        let pos = support.partition_point(|&s| s < s_star);
        support.insert(pos, s_star);
        report = bm2_pass(model, j, &support, &est.estimates, opts)?;
    }
    let (bound, _) = report;
    Ok(BoundReport {
        method: "bm2",
        gamma: bound.gamma,
        regions: vec![bound],
        iterations: k_max,
    })
}

/// One sweep over all subintervals of the support set: returns the refined
/// region bound and the winning subinterval.
fn bm2_pass(
    model: &ObservationModel,
    j: usize,
    support: &[f64],
    estimates: &[Extended],
    opts: &BoundOptions,
) -> Result<(RegionBound, (f64, f64))> {
    let mut best_gamma = f64::INFINITY;
    let mut best_x = f64::NAN;
    let mut best_lines = Vec::new();
    let mut best_span = (support[0], support[support.len() - 1]);
    for w in support.windows(2) {
        let (s_lo, s_hi) = (w[0], w[1]);
        if s_hi - s_lo <= 0.0 {
            continue;
        }
        let sub = Interval::finite(s_lo, s_hi);
        let lines = region_lines(model, j, sub, estimates, Some((s_lo, s_hi)))?;
        let (x, gamma) = minimize_modified(model, &lines, s_lo, s_hi, opts)?;
        if gamma < best_gamma {
            best_gamma = gamma;
            best_x = x;
            best_lines = lines;
            best_span = (s_lo, s_hi);
        }
    }
    Ok((
        RegionBound {
            region: j,
            gamma: best_gamma,
            minimizer: best_x,
            lines: best_lines,
        },
        best_span,
    ))
}

/// Bounding method 2 over every region of the model.
pub fn bm2_bound_model(
    model: &ObservationModel,
    k_max: usize,
    rule: SplitRule,
    opts: &BoundOptions,
) -> Result<BoundReport> {
    let mut regions = Vec::new();
    for j in 0..model.region_count() {
        regions.extend(bm2_bound(model, j, k_max, rule, opts)?.regions);
    }
    Ok(BoundReport::from_regions("bm2", regions, k_max))
}

/// Closed-form minimum of the quadratic modified potential
/// `sum_i (y_i - a_i x - b_i)^2`: the caller asserts all marginal potentials
/// are quadratic. Returns `(gamma_2, minimizer)`.
pub fn quadratic_bound(lines: &[LinearFn], y: &[f64]) -> Result<(f64, f64)> {
    if lines.len() != y.len() || lines.is_empty() {
        return Err(Error::Parameter("need one line per observation".into()));
    }
    let ata: f64 = lines.iter().map(|l| l.slope * l.slope).sum();
    if ata == 0.0 {
        return Err(Error::Parameter(
            "all slopes are zero; minimizer undefined".into(),
        ));
    }
    let atw: f64 = lines
        .iter()
        .zip(y)
        .map(|(l, &yi)| l.slope * (yi - l.intercept))
        .sum();
    let x = atw / ata;
    let gamma2 = lines
        .iter()
        .zip(y)
        .map(|(l, &yi)| {
            let r = yi - l.eval(x);
            r * r
        })
        .sum();
    Ok((gamma2, x))
}

/// The quadratic closed form applied region by region: minorant lines on each
/// simple-estimate interval, then the least-squares minimum, taking the best
/// region. The caller asserts unit-quadratic marginal potentials. Returns
/// `(gamma_2, minimizer)`.
pub fn quadratic_bound_model(model: &ObservationModel, opts: &BoundOptions) -> Result<(f64, f64)> {
    let mut best = (f64::INFINITY, f64::NAN);
    for j in 0..model.region_count() {
        let est = model.simple_estimates(j)?;
        let candidate = match est.search_interval() {
            Ok(interval) => {
                let lines = region_lines(model, j, interval, &est.estimates, None)?;
                if lines.iter().all(|l| l.slope == 0.0) {
                    // Flat modified potential: its value is the bound.
                    let g2 = lines
                        .iter()
                        .zip(model.observations())
                        .map(|(l, &y)| (y - l.intercept) * (y - l.intercept))
                        .sum();
                    let (lo, hi) = interval.clip(opts.horizon);
                    (g2, 0.5 * (lo + hi))
                } else {
                    quadratic_bound(&lines, model.observations())?
                }
            }
            Err(Error::DegenerateInterval { .. }) => {
                // Asymptote residuals under the quadratic joint potential,
                // regardless of the model's own marginals.
                let b = degenerate_region_bound(model, j, est.estimates[0], opts)?;
                let g2 = b
                    .lines
                    .iter()
                    .zip(model.observations())
                    .map(|(l, &y)| (y - l.intercept) * (y - l.intercept))
                    .sum();
                (g2, b.minimizer)
            }
            Err(e) => return Err(e),
        };
        if candidate.0 < best.0 {
            best = candidate;
        }
    }
    Ok(best)
}

/// Transforms the quadratic bound into a bound for the `sum |theta_i|^p`
/// joint potential via the norm inequalities.
pub fn lp_transform_bound(gamma2: f64, p: f64, n: usize) -> Result<f64> {
    if p <= 0.0 {
        return Err(Error::Parameter(format!("p must be positive, got {p}")));
    }
    if gamma2 < 0.0 {
        return Err(Error::Parameter(format!(
            "gamma2 must be nonnegative, got {gamma2}"
        )));
    }
    if p <= 2.0 {
        Ok(gamma2.powf(p / 2.0))
    } else {
        Ok((n as f64).powf(-(p - 2.0) / 2.0) * gamma2.powf(p / 2.0))
    }
}

/// Transforms the quadratic bound through a user-supplied increasing inverse
/// transform: returns `R^{-1}(gamma_2)`. The transform is sampled on a grid
/// around the argument to verify monotonicity.
pub fn generic_transform_bound(gamma2: f64, r_inv: &dyn Fn(f64) -> f64) -> Result<f64> {
    let span = gamma2.abs().max(1.0);
    let grid = numeric::linspace(gamma2 - span, gamma2 + span, 101);
    let mut prev = f64::NEG_INFINITY;
    for &v in grid.iter().filter(|v| **v >= 0.0) {
        let r = r_inv(v);
        if !r.is_finite() {
            return Err(Error::Contract(format!("transform non-finite at v = {v}")));
        }
        if r < prev - 1e-12 {
            return Err(Error::Contract(format!(
                "transform is not increasing near v = {v}"
            )));
        }
        prev = r;
    }
    Ok(r_inv(gamma2))
}

/// Two-tangent bound for convex marginal potentials: tangents to the modified
/// potential at the endpoints of the search interval; their intersection
/// ordinate bounds the true potential on the region.
pub fn convex_tangent_bound(
    model: &ObservationModel,
    j: usize,
    opts: &BoundOptions,
) -> Result<f64> {
    if !all_marginals_convex(model) {
        return Err(Error::Contract(
            "tangent bound requires convex marginal potentials".into(),
        ));
    }
    let est = model.simple_estimates(j)?;
    let interval = match est.search_interval() {
        Ok(i) => i,
        Err(Error::DegenerateInterval { .. }) => {
            return Ok(degenerate_region_bound(model, j, est.estimates[0], opts)?.gamma)
        }
        Err(e) => return Err(e),
    };
    let lines = region_lines(model, j, interval, &est.estimates, None)?;
    let constant = if opts.include_constant {
        model.constant()
    } else {
        0.0
    };
    let f = modified_potential(model, &lines, constant);
    let (lo, hi) = interval.clip(opts.horizon);
    if hi - lo <= 1e-12 {
        return Ok(f(lo));
    }
    // Tangents by central differences, stepped inward at the endpoints.
    let slope_lo = numeric::one_sided_diff(&f, lo, FD_STEP, 1.0);
    let slope_hi = numeric::one_sided_diff(&f, hi, FD_STEP, -1.0);
    let t_lo = LinearFn {
        slope: slope_lo,
        intercept: f(lo) - slope_lo * lo,
    };
    let t_hi = LinearFn {
        slope: slope_hi,
        intercept: f(hi) - slope_hi * hi,
    };
    if slope_lo < 0.0 && slope_hi > 0.0 {
        let x = t_lo
            .intersect(&t_hi)
            .expect("opposite slopes always intersect");
        Ok(t_lo.eval(x))
    } else {
        // No interior intersection: the potential is monotone over the
        // interval, so an endpoint value already bounds it.
        log::warn!("tangent slopes do not bracket a minimum in region {j}; using endpoint value");
        Ok(f(lo).min(f(hi)))
    }
}

/// The tangent bound over every region.
pub fn convex_tangent_bound_model(model: &ObservationModel, opts: &BoundOptions) -> Result<f64> {
    let mut best = f64::INFINITY;
    for j in 0..model.region_count() {
        best = best.min(convex_tangent_bound(model, j, opts)?);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::test_models::example1;
    use crate::model::{MarginalPotential, Nonlinearity, ObservationModel};
    use approx::assert_abs_diff_eq;
    use std::sync::Arc;

    fn example1_interval() -> Interval {
        Interval::finite(-(5.0_f64.ln()), 2.0_f64.ln())
    }

    #[test]
    fn example1_minorant_lines_match_quoted_coefficients() {
        let m = example1();
        let est = m.simple_estimates(0).unwrap();
        let interval = est.search_interval().unwrap();
        // Quoted coefficients are printed to two decimals (truncated).
        let r1 = build_minorant_line(
            m.branch_in_region(0, 0).unwrap(),
            2.0,
            interval,
            est.estimates[0],
        )
        .unwrap();
        assert_abs_diff_eq!(r1.slope, 0.78, epsilon = 0.01);
        assert_abs_diff_eq!(r1.intercept, 1.45, epsilon = 0.01);
        let r2 = build_minorant_line(
            m.branch_in_region(1, 0).unwrap(),
            5.0,
            interval,
            est.estimates[1],
        )
        .unwrap();
        assert_abs_diff_eq!(r2.slope, -1.95, epsilon = 0.01);
        assert_abs_diff_eq!(r2.intercept, 1.85, epsilon = 0.01);
        assert!(check_minorant(
            &r1,
            m.branch_in_region(0, 0).unwrap(),
            2.0,
            interval
        ));
        assert!(check_minorant(
            &r2,
            m.branch_in_region(1, 0).unwrap(),
            5.0,
            interval
        ));
    }

    #[test]
    fn chord_of_linear_branch_is_the_branch() {
        let branch = crate::model::NonlinearBranch::new(
            Interval::all(),
            |x| 2.0 * x + 1.0,
            |_| 2.0,
            |_| 0.0,
            1,
            1,
        )
        .unwrap();
        let est = branch.invert(7.0).unwrap();
        let line = build_minorant_line(&branch, 7.0, Interval::finite(-2.0, 5.0), est).unwrap();
        assert_abs_diff_eq!(line.slope, 2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(line.intercept, 1.0, epsilon = 1e-9);
        // Equality case of the minorant conditions.
        assert!(check_minorant(
            &line,
            &branch,
            7.0,
            Interval::finite(-2.0, 5.0)
        ));
    }

    #[test]
    fn doubled_residual_fails_minorant_check() {
        let m = example1();
        let branch = m.branch_in_region(0, 0).unwrap();
        let interval = example1_interval();
        // r(x) = y + 2 (g(x) - y) doubles the residual; sample it as a chord
        // of the doubled function at the interval endpoints.
        let y = 2.0;
        let f = |x: f64| y + 2.0 * (branch.eval(x) - y);
        let (lo, hi) = interval.clip(1e3);
        let bad = LinearFn::through(lo, f(lo), hi, f(hi));
        assert!(!check_minorant(&bad, branch, y, interval));
    }

    #[test]
    fn minimize_convex_matches_quoted_minimizer() {
        // The quoted minimizer -0.4171 belongs to the modified potential with
        // the two-decimal line coefficients as printed.
        let m = example1();
        let lines = vec![LinearFn::new(0.78, 1.45), LinearFn::new(-1.95, 1.85)];
        let f = modified_potential(&m, &lines, 0.0);
        let (x, _) = minimize_convex_1d(&f, -(5.0_f64.ln()), 2.0_f64.ln()).unwrap();
        assert_abs_diff_eq!(x, -0.4171, epsilon = 1e-3);
    }

    #[test]
    fn bm1_reproduces_quoted_bound() {
        let m = example1();
        let report = bm1_bound(&m, &BoundOptions::default()).unwrap();
        assert_abs_diff_eq!(report.gamma, 2.89, epsilon = 0.01);
        report.check_sound(&m, -3.0, 2.0, 100_000, 1e-6).unwrap();
    }

    #[test]
    fn bm1_exact_for_linear_model() {
        // All-linear nonlinearities make the minorants exact, so the bound
        // equals the true grid minimum.
        let g1 = Nonlinearity::identity();
        let g2 = Nonlinearity::single(
            crate::model::NonlinearBranch::new(
                Interval::all(),
                |x| -2.0 * x,
                |_| -2.0,
                |_| 0.0,
                -1,
                1,
            )
            .unwrap(),
        )
        .unwrap();
        let m = ObservationModel::new(
            vec![1.0, 3.0],
            vec![Arc::new(g1), Arc::new(g2)],
            vec![
                MarginalPotential::gaussian(0.5).unwrap(),
                MarginalPotential::gaussian(0.5).unwrap(),
            ],
            None,
            0.0,
        )
        .unwrap();
        let report = bm1_bound(&m, &BoundOptions::default()).unwrap();
        let grid_min = numeric::linspace(-5.0, 5.0, 200_001)
            .iter()
            .map(|&x| m.observation_potential(x).unwrap())
            .fold(f64::INFINITY, f64::min);
        assert_abs_diff_eq!(report.gamma, grid_min, epsilon = 1e-6);
    }

    #[test]
    fn bm1_perfect_fit_is_zero() {
        let g = Nonlinearity::identity();
        let m = ObservationModel::new(
            vec![4.0],
            vec![Arc::new(g)],
            vec![MarginalPotential::gaussian(0.5).unwrap()],
            None,
            0.0,
        )
        .unwrap();
        let report = bm1_bound(&m, &BoundOptions::default()).unwrap();
        assert_abs_diff_eq!(report.gamma, 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(report.regions[0].minimizer, 4.0, epsilon = 1e-6);
    }

    #[test]
    fn bm2_zero_iterations_equals_bm1() {
        let m = example1();
        let bm1 = bm1_bound(&m, &BoundOptions::default()).unwrap();
        let bm2 = bm2_bound(&m, 0, 0, SplitRule::Midpoint, &BoundOptions::default()).unwrap();
        assert_abs_diff_eq!(bm2.gamma, bm1.gamma, epsilon = 1e-12);
    }

    #[test]
    fn bm2_three_iterations_reproduces_quoted_bound() {
        let m = example1();
        let report = bm2_bound(&m, 0, 3, SplitRule::Midpoint, &BoundOptions::default()).unwrap();
        assert_abs_diff_eq!(report.gamma, 3.77, epsilon = 0.01);
    }

    #[test]
    fn bm2_twelve_iterations_approaches_grid_minimum() {
        let m = example1();
        let grid_min = numeric::linspace(-(5.0_f64.ln()), 2.0_f64.ln(), 400_001)
            .iter()
            .map(|&x| m.observation_potential(x).unwrap())
            .fold(f64::INFINITY, f64::min);
        let report = bm2_bound(&m, 0, 12, SplitRule::Midpoint, &BoundOptions::default()).unwrap();
        assert!(report.gamma <= grid_min + 1e-9);
        assert!(
            grid_min - report.gamma <= 0.005,
            "gap {}",
            grid_min - report.gamma
        );
    }

    #[test]
    fn bm2_is_monotone_in_iterations() {
        let m = example1();
        let mut prev = f64::NEG_INFINITY;
        for k in 0..8 {
            let g = bm2_bound(&m, 0, k, SplitRule::Midpoint, &BoundOptions::default())
                .unwrap()
                .gamma;
            assert!(g >= prev - 1e-9, "bound regressed at k = {k}: {g} < {prev}");
            prev = g;
        }
    }

    #[test]
    fn quadratic_bound_consistent_system() {
        let lines = vec![LinearFn::new(1.0, 0.0), LinearFn::new(1.0, 0.0)];
        let (g2, x) = quadratic_bound(&lines, &[1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(x, 1.0);
        assert_abs_diff_eq!(g2, 0.0);
    }

    #[test]
    fn quadratic_bound_symmetric_split() {
        let lines = vec![LinearFn::new(1.0, 0.0), LinearFn::new(-1.0, 0.0)];
        let (g2, x) = quadratic_bound(&lines, &[1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(x, 0.0);
        assert_abs_diff_eq!(g2, 2.0);
    }

    #[test]
    fn quadratic_bound_matches_numeric_minimizer() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut tested = 0;
        while tested < 10 {
            let n = rng.gen_range(1..5usize);
            let lines: Vec<LinearFn> = (0..n)
                .map(|_| LinearFn::new(rng.gen_range(-3.0..3.0), rng.gen_range(-2.0..2.0)))
                .collect();
            // Near-flat families put the vertex outside any fixed window.
            if !lines.iter().any(|l| l.slope.abs() >= 0.1) {
                continue;
            }
            tested += 1;
            let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-4.0..4.0)).collect();
            let (g2, _) = quadratic_bound(&lines, &y).unwrap();
            let f = |x: f64| -> f64 {
                lines
                    .iter()
                    .zip(&y)
                    .map(|(l, &yi)| {
                        let r = yi - l.eval(x);
                        r * r
                    })
                    .sum()
            };
            let (_, v) = numeric::golden_section_min(&f, -5000.0, 5000.0).unwrap();
            assert_abs_diff_eq!(g2, v, epsilon = 1e-8);
        }
    }

    #[test]
    fn quadratic_bound_rejects_flat_lines() {
        let lines = vec![LinearFn::constant(1.0)];
        assert!(quadratic_bound(&lines, &[0.5]).is_err());
    }

    #[test]
    fn lp_transform_values() {
        assert_abs_diff_eq!(lp_transform_bound(5.0, 2.0, 3).unwrap(), 5.0);
        assert_abs_diff_eq!(lp_transform_bound(4.0, 1.0, 3).unwrap(), 2.0);
        assert_abs_diff_eq!(lp_transform_bound(2.0, 4.0, 2).unwrap(), 2.0);
        assert!(lp_transform_bound(1.0, 0.0, 1).is_err());
    }

    #[test]
    fn lp_transform_continuous_at_two() {
        for &g2 in &[0.3, 1.0, 7.5] {
            let below = lp_transform_bound(g2, 2.0, 4).unwrap();
            let above = (4.0_f64).powf(0.0) * g2; // n^0 * g2
            assert_abs_diff_eq!(below, above, epsilon = 1e-12);
        }
    }

    #[test]
    fn transform_bound_reproduces_quoted_values() {
        // gamma_2 from the quadratic closed form on the quoted minorants,
        // then through the model-specific inverse transform.
        let m = example1();
        let est = m.simple_estimates(0).unwrap();
        let interval = est.search_interval().unwrap();
        let lines = region_lines(&m, 0, interval, &est.estimates, None).unwrap();
        let (g2, _) = quadratic_bound(&lines, m.observations()).unwrap();
        assert_abs_diff_eq!(g2, 2.79, epsilon = 0.01);
        let r_inv = |v: f64| -(v.sqrt() + 1.0).ln() + v.sqrt() + 1.0;
        let gamma = generic_transform_bound(g2, &r_inv).unwrap();
        assert_abs_diff_eq!(gamma, 1.68, epsilon = 0.01);
    }

    #[test]
    fn identity_transform_is_identity() {
        assert_abs_diff_eq!(generic_transform_bound(2.5, &|v| v).unwrap(), 2.5);
    }

    #[test]
    fn decreasing_transform_is_rejected() {
        assert!(generic_transform_bound(1.0, &|v| -v).is_err());
    }

    #[test]
    fn tangent_bound_reproduces_quoted_value() {
        let m = example1();
        let gamma = convex_tangent_bound(&m, 0, &BoundOptions::default()).unwrap();
        assert_abs_diff_eq!(gamma, 1.61, epsilon = 0.01);
        // Looser than the plain bound on this model.
        let bm1 = bm1_bound(&m, &BoundOptions::default()).unwrap();
        assert!(gamma < bm1.gamma);
    }

    #[test]
    fn tangent_bound_symmetric_quadratic() {
        // Symmetric modified potential over a symmetric interval: the
        // tangents intersect at the midpoint, at the vertex value.
        let g = Nonlinearity::identity();
        let m = ObservationModel::new(
            vec![0.0],
            vec![Arc::new(g)],
            vec![MarginalPotential::gaussian(0.5).unwrap()],
            None,
            0.0,
        )
        .unwrap();
        // Single estimate makes the interval degenerate; widen it by hand.
        let est = m.simple_estimates(0).unwrap();
        let lines = region_lines(&m, 0, Interval::finite(-2.0, 2.0), &est.estimates, None).unwrap();
        let f = modified_potential(&m, &lines, 0.0);
        let slope_lo = numeric::one_sided_diff(&f, -2.0, FD_STEP, 1.0);
        let slope_hi = numeric::one_sided_diff(&f, 2.0, FD_STEP, -1.0);
        let t_lo = LinearFn {
            slope: slope_lo,
            intercept: f(-2.0) + slope_lo * 2.0,
        };
        let t_hi = LinearFn {
            slope: slope_hi,
            intercept: f(2.0) - slope_hi * 2.0,
        };
        let x = t_lo.intersect(&t_hi).unwrap();
        assert_abs_diff_eq!(x, 0.0, epsilon = 1e-6);
        assert_abs_diff_eq!(t_lo.eval(x), -4.0, epsilon = 1e-4); // vertex of tangents below 0
    }

    #[test]
    fn minorant_dominance_on_interval() {
        // Modified potential never exceeds the true potential on the search
        // interval (premise of the bound chain).
        let m = example1();
        let est = m.simple_estimates(0).unwrap();
        let interval = est.search_interval().unwrap();
        let lines = region_lines(&m, 0, interval, &est.estimates, None).unwrap();
        let f = modified_potential(&m, &lines, 0.0);
        let (lo, hi) = interval.clip(1e3);
        for &x in numeric::linspace(lo, hi, 2000).iter() {
            let modified = f(x);
            let truth = m.observation_potential(x).unwrap();
            assert!(
                modified <= truth + 1e-9,
                "dominance fails at {x}: {modified} > {truth}"
            );
        }
    }
}
