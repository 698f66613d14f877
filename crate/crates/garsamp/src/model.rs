//! Noise potentials, nonlinear observation functions, priors, and the
//! assembled system potential.
//!
//! A scalar signal is observed through nonlinearities `g_i` contaminated by
//! independent additive noise with exponential-type densities
//! `k_i exp(-V_i(theta))`. The marginal potentials `V_i` are nonnegative with
//! a unique minimum at zero; each nonlinearity is declared as a partition of
//! branches that are monotone and of constant curvature. Metadata is verified
//! on a grid at construction time; violations are hard errors.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::extended::{Extended, Interval};
use crate::numeric::{self, open_grid};

/// Grid resolution used to verify declared metadata at construction.
const VERIFY_GRID: usize = 1000;
/// Window used to verify metadata on unbounded branches.
const VERIFY_SPAN: f64 = 30.0;
/// Sign-check slack for grid verification.
const VERIFY_TOL: f64 = 1e-9;
/// Round-trip tolerance for simple estimates: `|g(x) - y| <= ROUND_TRIP_TOL`.
pub const ROUND_TRIP_TOL: f64 = 1e-9;

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A marginal noise potential `V(theta)`: nonnegative, decreasing for
/// `theta < 0` and increasing for `theta > 0`.
#[derive(Clone)]
pub struct MarginalPotential {
    eval: RealFn,
    deriv: RealFn,
    convex: bool,
    log_norm: f64,
    /// Values of `theta` at or below this bound have infinite potential
    /// (zero noise density); `-inf` for potentials supported on all reals.
    support_lo: f64,
}

impl MarginalPotential {
    /// Builds a potential from closures and verifies P1/P2 (and convexity
    /// when flagged) on a grid.
    pub fn new(
        eval: impl Fn(f64) -> f64 + Send + Sync + 'static,
        deriv: impl Fn(f64) -> f64 + Send + Sync + 'static,
        convex: bool,
        log_norm: f64,
    ) -> Result<Self> {
        Self::with_support(eval, deriv, convex, log_norm, f64::NEG_INFINITY)
    }

    /// As [`MarginalPotential::new`] for potentials that are `+inf` at or
    /// below `support_lo` (e.g. shifted gamma noise).
    pub fn with_support(
        eval: impl Fn(f64) -> f64 + Send + Sync + 'static,
        deriv: impl Fn(f64) -> f64 + Send + Sync + 'static,
        convex: bool,
        log_norm: f64,
        support_lo: f64,
    ) -> Result<Self> {
        let p = MarginalPotential {
            eval: Arc::new(eval),
            deriv: Arc::new(deriv),
            convex,
            log_norm,
            support_lo,
        };
        p.verify()?;
        Ok(p)
    }

    /// `V(theta)`; `+inf` outside the support.
    pub fn eval(&self, theta: f64) -> f64 {
        if theta <= self.support_lo {
            return f64::INFINITY;
        }
        (self.eval)(theta)
    }

    /// `dV/dtheta`.
    pub fn deriv(&self, theta: f64) -> f64 {
        (self.deriv)(theta)
    }

    pub fn is_convex(&self) -> bool {
        self.convex
    }

    /// The `-log k` normalization constant, excluded from `eval`.
    pub fn log_norm(&self) -> f64 {
        self.log_norm
    }

    fn verify(&self) -> Result<()> {
        let lo = self.support_lo.max(-VERIFY_SPAN);
        let hi = VERIFY_SPAN;
        let grid = open_grid(lo, hi, VERIFY_GRID);
        let mut min_v = f64::INFINITY;
        let mut min_at = f64::NAN;
        for &t in &grid {
            let v = self.eval(t);
            if v.is_nan() {
                return Err(Error::Model(format!("potential is NaN at theta = {t}")));
            }
            if v < -VERIFY_TOL {
                return Err(Error::Model(format!(
                    "potential negative at theta = {t}: {v}"
                )));
            }
            if v < min_v {
                min_v = v;
                min_at = t;
            }
            if t != 0.0 {
                let d = self.deriv(t);
                if d * t.signum() <= -VERIFY_TOL {
                    return Err(Error::Model(format!(
                        "potential derivative has wrong sign at theta = {t}: {d}"
                    )));
                }
            }
        }
        // The grid is open, so the minimum lands on the cell nearest zero.
        let cell = (hi - lo) / VERIFY_GRID as f64;
        if min_at.abs() > cell {
            return Err(Error::Model(format!(
                "potential grid-minimum at theta = {min_at}, expected near 0"
            )));
        }
        if self.convex {
            let h = cell;
            for &t in &grid[1..grid.len() - 1] {
                let second = self.eval(t + h) - 2.0 * self.eval(t) + self.eval(t - h);
                if second.is_finite() && second < -1e-7 * (1.0 + self.eval(t).abs()) {
                    return Err(Error::Model(format!(
                        "potential flagged convex but second difference at theta = {t} is {second}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Gaussian noise `N(0, variance)`: `V(theta) = theta^2 / (2 variance)`.
    pub fn gaussian(variance: f64) -> Result<Self> {
        if variance <= 0.0 {
            return Err(Error::Parameter(format!(
                "gaussian variance must be positive, got {variance}"
            )));
        }
        let inv = 1.0 / (2.0 * variance);
        Self::new(
            move |t| inv * t * t,
            move |t| 2.0 * inv * t,
            true,
            0.5 * (2.0 * std::f64::consts::PI * variance).ln(),
        )
    }

    /// Shifted gamma noise with shape `theta_shape` and rate `lambda`,
    /// recentered so the mode sits at zero:
    /// `V(t) = -(shape-1) log(t + m) + lambda (t + m)` with `m = (shape-1)/lambda`.
    pub fn gamma_shifted(theta_shape: f64, lambda: f64) -> Result<Self> {
        if theta_shape <= 1.0 || lambda <= 0.0 {
            return Err(Error::Parameter(
                "gamma potential needs shape > 1 and rate > 0 for a centered mode".into(),
            ));
        }
        let m = (theta_shape - 1.0) / lambda;
        Self::with_support(
            move |t| -(theta_shape - 1.0) * (t + m).ln() + lambda * (t + m),
            move |t| -(theta_shape - 1.0) / (t + m) + lambda,
            true,
            0.0,
            -m,
        )
    }

    /// `V(theta) = |theta|^p`, convex for `p >= 1`.
    pub fn lp(p: f64) -> Result<Self> {
        if p <= 0.0 {
            return Err(Error::Parameter(format!(
                "lp exponent must be positive, got {p}"
            )));
        }
        Self::new(
            move |t| t.abs().powf(p),
            move |t| {
                if t == 0.0 {
                    0.0
                } else {
                    p * t.abs().powf(p - 1.0) * t.signum()
                }
            },
            p >= 1.0,
            0.0,
        )
    }

    /// `V(theta) = cosh(theta)`.
    pub fn cosh() -> Result<Self> {
        Self::new(|t| t.cosh(), |t| t.sinh(), true, 0.0)
    }
}

impl std::fmt::Debug for MarginalPotential {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MarginalPotential")
            .field("convex", &self.convex)
            .field("log_norm", &self.log_norm)
            .finish()
    }
}

/// One invertible branch of a nonlinearity: monotone with constant curvature
/// sign on its domain.
#[derive(Clone)]
pub struct NonlinearBranch {
    domain: Interval,
    eval: RealFn,
    d1: RealFn,
    d2: RealFn,
    monotone_sign: i8,
    curvature_sign: i8,
    /// Set when the second derivative vanishes on the verification grid.
    linear: bool,
}

impl NonlinearBranch {
    pub fn new(
        domain: Interval,
        eval: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d1: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d2: impl Fn(f64) -> f64 + Send + Sync + 'static,
        monotone_sign: i8,
        curvature_sign: i8,
    ) -> Result<Self> {
        if monotone_sign.abs() != 1 || curvature_sign.abs() != 1 {
            return Err(Error::Model("branch signs must be +1 or -1".into()));
        }
        let mut b = NonlinearBranch {
            domain,
            eval: Arc::new(eval),
            d1: Arc::new(d1),
            d2: Arc::new(d2),
            monotone_sign,
            curvature_sign,
            linear: false,
        };
        b.verify()?;
        Ok(b)
    }

    pub fn domain(&self) -> Interval {
        self.domain
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.eval)(x)
    }

    pub fn d1(&self, x: f64) -> f64 {
        (self.d1)(x)
    }

    pub fn d2(&self, x: f64) -> f64 {
        (self.d2)(x)
    }

    pub fn monotone_sign(&self) -> i8 {
        self.monotone_sign
    }

    pub fn curvature_sign(&self) -> i8 {
        self.curvature_sign
    }

    pub fn is_linear(&self) -> bool {
        self.linear
    }

    /// Tangent line to the branch at `x`: returns `(slope, intercept)`.
    pub fn tangent_at(&self, x: f64) -> (f64, f64) {
        let s = self.d1(x);
        (s, self.eval(x) - s * x)
    }

    fn verify(&mut self) -> Result<()> {
        let (lo, hi) = self.verify_window();
        let grid = open_grid(lo, hi, VERIFY_GRID);
        let mut max_abs_d2 = 0.0_f64;
        for &x in &grid {
            let v = self.eval(x);
            if !v.is_finite() {
                return Err(Error::Model(format!(
                    "branch value non-finite at x = {x}: {v}"
                )));
            }
            let d1 = self.d1(x);
            if d1 * f64::from(self.monotone_sign) <= -VERIFY_TOL {
                return Err(Error::Model(format!(
                    "declared monotone sign {} violated at x = {x}: d1 = {d1}",
                    self.monotone_sign
                )));
            }
            let d2 = self.d2(x);
            if d2.is_finite() {
                if d2 * f64::from(self.curvature_sign) < -1e-7 * (1.0 + d1.abs()) {
                    return Err(Error::Model(format!(
                        "declared curvature sign {} violated at x = {x}: d2 = {d2}",
                        self.curvature_sign
                    )));
                }
                max_abs_d2 = max_abs_d2.max(d2.abs());
            }
        }
        self.linear = max_abs_d2 <= 1e-10;
        Ok(())
    }

    fn verify_window(&self) -> (f64, f64) {
        let lo = match self.domain.lo {
            Extended::Finite(l) => l,
            _ => -VERIFY_SPAN,
        };
        let hi = match self.domain.hi {
            Extended::Finite(h) => h,
            _ => VERIFY_SPAN,
        };
        if lo < hi {
            (lo, hi)
        } else {
            (lo - 1.0, lo + 1.0)
        }
    }

    /// Solves `g(x) = y` on the branch. Returns the finite root when `y` is
    /// in range, or the arg-extremum of the closed branch (possibly a
    /// sentinel) when `y` falls outside, per the boundary rule.
    pub fn invert(&self, y: f64) -> Result<Extended> {
        let (lo_v, hi_v) = self.endpoint_values();
        // Range endpoints ordered by value.
        let (min_end, min_v, max_end, max_v) = if lo_v <= hi_v {
            (self.domain.lo, lo_v, self.domain.hi, hi_v)
        } else {
            (self.domain.hi, hi_v, self.domain.lo, lo_v)
        };
        if y > max_v {
            return Ok(max_end);
        }
        if y < min_v {
            return Ok(min_end);
        }
        // Roots sitting exactly on a finite endpoint stall a sign-change
        // bracket; catch them first.
        for end in [self.domain.lo, self.domain.hi] {
            if let Extended::Finite(e) = end {
                if (self.eval(e) - y).abs() <= 1e-12 * (1.0 + y.abs()) {
                    return Ok(Extended::Finite(e));
                }
            }
        }
        // y is strictly inside the range: bracket a finite interval and solve.
        let (mut lo, mut hi) = self.finite_bracket(y)?;
        if lo > hi {
            std::mem::swap(&mut lo, &mut hi);
        }
        let f = |x: f64| self.eval(x) - y;
        let d = |x: f64| self.d1(x);
        let root = numeric::find_root(&f, Some(&d), lo, hi)?;
        Ok(Extended::Finite(root))
    }

    /// Branch values at the closed endpoints, evaluated in the limit for
    /// unbounded domains by marching outward until the value stabilizes or
    /// diverges monotonically.
    fn endpoint_values(&self) -> (f64, f64) {
        let lo = match self.domain.lo {
            Extended::Finite(l) => self.eval(l),
            _ => self.limit_value(-1.0),
            // Extended::PosInf cannot be a lower endpoint of a valid interval.
        };
        let hi = match self.domain.hi {
            Extended::Finite(h) => self.eval(h),
            _ => self.limit_value(1.0),
        };
        (lo, hi)
    }

    /// Approximate limit of the branch toward `direction * inf`: the value at
    /// a far point, saturating to `±inf` when still growing.
    fn limit_value(&self, direction: f64) -> f64 {
        let anchor = self.finite_anchor();
        let near = self.eval(anchor + direction * 64.0);
        let far = self.eval(anchor + direction * 512.0);
        if !far.is_finite() {
            return far;
        }
        if (far - near).abs() <= 1e-9 * (1.0 + far.abs()) {
            far
        } else {
            // Monotone branch still moving: it diverges in this direction.
            if far > near {
                f64::INFINITY
            } else {
                f64::NEG_INFINITY
            }
        }
    }

    fn finite_anchor(&self) -> f64 {
        match (self.domain.lo, self.domain.hi) {
            (Extended::Finite(l), Extended::Finite(h)) => 0.5 * (l + h),
            (Extended::Finite(l), _) => l,
            (_, Extended::Finite(h)) => h,
            _ => 0.0,
        }
    }

    /// A finite bracket `[lo, hi]` with `g - y` changing sign. The branch is
    /// monotone, so the residual sign at the anchor tells which direction the
    /// root lies; the bracket expands geometrically that way, clamped to
    /// finite domain endpoints.
    fn finite_bracket(&self, y: f64) -> Result<(f64, f64)> {
        let residual = |x: f64| self.eval(x) - y;
        let anchor = self.finite_anchor();
        let r0 = residual(anchor);
        if r0 == 0.0 {
            return Ok((anchor, anchor));
        }
        // The residual grows toward monotone_sign; move toward its zero.
        let dir = -r0.signum() * f64::from(self.monotone_sign);
        let limit = if dir > 0.0 {
            self.domain.hi
        } else {
            self.domain.lo
        };
        let mut step = 1.0;
        loop {
            let mut x = anchor + dir * step;
            let mut clamped = false;
            if let Extended::Finite(b) = limit {
                if (dir > 0.0 && x >= b) || (dir < 0.0 && x <= b) {
                    x = b;
                    clamped = true;
                }
            }
            let r = residual(x);
            if !r.is_finite() && !clamped {
                return Err(Error::Numeric(format!(
                    "residual became non-finite while bracketing g(x) = {y} on {}",
                    self.domain
                )));
            }
            if r == 0.0 || r.signum() != r0.signum() {
                return if dir > 0.0 {
                    Ok((anchor, x))
                } else {
                    Ok((x, anchor))
                };
            }
            if clamped || step >= 1e12 {
                return Err(Error::Numeric(format!(
                    "could not bracket root of g(x) = {y} on {}",
                    self.domain
                )));
            }
            step *= 2.0;
        }
    }
}

impl std::fmt::Debug for NonlinearBranch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NonlinearBranch")
            .field("domain", &self.domain)
            .field("monotone_sign", &self.monotone_sign)
            .field("curvature_sign", &self.curvature_sign)
            .field("linear", &self.linear)
            .finish()
    }
}

/// Monotonicity of a nonlinearity over its whole support.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Monotonicity {
    Monotonic,
    NonMonotonic,
}

/// Curvature of a nonlinearity over its whole support.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Curvature {
    Convex,
    Concave,
}

/// Construction class used by the adaptive sampler.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapeClass {
    /// Non-monotonic, globally convex or concave.
    NonMonotonic(Curvature),
    /// Monotonic with `d1 * d2 >= 0` (increasing convex / decreasing concave).
    MonotonicCaseA(Curvature),
    /// Monotonic with `d1 * d2 <= 0` (increasing concave / decreasing convex).
    MonotonicCaseB(Curvature),
}

impl ShapeClass {
    pub fn curvature(self) -> Curvature {
        match self {
            ShapeClass::NonMonotonic(c)
            | ShapeClass::MonotonicCaseA(c)
            | ShapeClass::MonotonicCaseB(c) => c,
        }
    }
}

/// A nonlinearity as an ordered list of branches partitioning its support.
#[derive(Debug, Clone)]
pub struct Nonlinearity {
    branches: Vec<NonlinearBranch>,
}

impl Nonlinearity {
    pub fn new(branches: Vec<NonlinearBranch>) -> Result<Self> {
        if branches.is_empty() {
            return Err(Error::Model(
                "nonlinearity needs at least one branch".into(),
            ));
        }
        for pair in branches.windows(2) {
            let hi = pair[0].domain().hi;
            let lo = pair[1].domain().lo;
            match (hi, lo) {
                (Extended::Finite(h), Extended::Finite(l)) if (h - l).abs() <= 1e-12 => {}
                _ => return Err(Error::Model(format!(
                    "branch domains must partition the support; gap or overlap between {} and {}",
                    pair[0].domain(),
                    pair[1].domain()
                ))),
            }
        }
        let nl = Nonlinearity { branches };
        nl.shape_class()?; // rejects inconsistent metadata
        Ok(nl)
    }

    /// A single branch covering the whole real line.
    pub fn single(branch: NonlinearBranch) -> Result<Self> {
        Nonlinearity::new(vec![branch])
    }

    /// The identity map, used for the prior term of extended models.
    pub fn identity() -> Self {
        let branch = NonlinearBranch {
            domain: Interval::all(),
            eval: Arc::new(|x| x),
            d1: Arc::new(|_| 1.0),
            d2: Arc::new(|_| 0.0),
            monotone_sign: 1,
            curvature_sign: 1,
            linear: true,
        };
        Nonlinearity {
            branches: vec![branch],
        }
    }

    pub fn branches(&self) -> &[NonlinearBranch] {
        &self.branches
    }

    pub fn support(&self) -> Interval {
        Interval::new(
            self.branches.first().unwrap().domain().lo,
            self.branches.last().unwrap().domain().hi,
        )
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.branch_at(x).eval(x)
    }

    pub fn d1(&self, x: f64) -> f64 {
        self.branch_at(x).d1(x)
    }

    /// The branch whose domain contains `x`; shared endpoints resolve to the
    /// left branch.
    pub fn branch_at(&self, x: f64) -> &NonlinearBranch {
        for b in &self.branches {
            match b.domain().hi {
                Extended::Finite(h) if x > h => continue,
                _ => return b,
            }
        }
        self.branches.last().unwrap()
    }

    pub fn is_linear(&self) -> bool {
        self.branches.len() == 1 && self.branches[0].is_linear()
    }

    /// Classifies the nonlinearity for the adaptive construction:
    /// non-monotonic convex/concave, or monotonic case (a)/(b).
    pub fn shape_class(&self) -> Result<ShapeClass> {
        let curv = self.branches[0].curvature_sign();
        if self.branches.iter().any(|b| b.curvature_sign() != curv) {
            return Err(Error::Model(
                "branches disagree on curvature; nonlinearity is neither convex nor concave".into(),
            ));
        }
        let curvature = if curv > 0 {
            Curvature::Convex
        } else {
            Curvature::Concave
        };
        let signs: Vec<i8> = self.branches.iter().map(|b| b.monotone_sign()).collect();
        let changes = signs.windows(2).filter(|w| w[0] != w[1]).count();
        match changes {
            0 => {
                let mono = signs[0];
                // d1*d2 sign; linear branches (d2 = 0) default to case (a).
                if self.is_linear() || mono * curv >= 0 {
                    Ok(ShapeClass::MonotonicCaseA(curvature))
                } else {
                    Ok(ShapeClass::MonotonicCaseB(curvature))
                }
            }
            1 => {
                let ok = match curvature {
                    Curvature::Convex => signs[0] < 0,  // decreasing then increasing
                    Curvature::Concave => signs[0] > 0, // increasing then decreasing
                };
                if !ok {
                    return Err(Error::Model(
                        "monotone signs inconsistent with declared curvature".into(),
                    ));
                }
                Ok(ShapeClass::NonMonotonic(curvature))
            }
            n => Err(Error::Model(format!(
                "{n} monotone sign changes across branches; at most one is allowed"
            ))),
        }
    }

    /// All finite solutions of `g(x) = y` across branches, ascending and
    /// deduplicated. Non-monotonic nonlinearities yield up to two.
    pub fn global_estimates(&self, y: f64) -> Result<Vec<f64>> {
        let mut out = Vec::new();
        for b in &self.branches {
            if let Extended::Finite(x) = b.invert(y)? {
                if (b.eval(x) - y).abs() <= 1e-6 * (1.0 + y.abs()) {
                    out.push(x);
                }
            }
        }
        out.sort_by(|a, b| a.partial_cmp(b).unwrap());
        out.dedup_by(|a, b| (*a - *b).abs() <= 1e-9);
        Ok(out)
    }
}

/// The simple estimates of one region: per-observation roots of
/// `g_i(x) = y_i` restricted to the region, with `±inf` sentinels where the
/// observation falls outside the branch range.
#[derive(Debug, Clone)]
pub struct SimpleEstimateSet {
    pub region: usize,
    pub estimates: Vec<Extended>,
}

impl SimpleEstimateSet {
    /// The search interval `I_j = [min X_j, max X_j]`; every region-restricted
    /// maximum-likelihood estimate lies inside it.
    pub fn search_interval(&self) -> Result<Interval> {
        if !self.estimates.iter().any(|e| e.is_finite()) {
            return Err(Error::DegenerateInterval {
                region: self.region,
            });
        }
        let mut lo = self.estimates[0];
        let mut hi = self.estimates[0];
        for &e in &self.estimates[1..] {
            lo = lo.min_ext(e);
            hi = hi.max_ext(e);
        }
        Ok(Interval::new(lo, hi))
    }
}

/// Optional prior term of the extended model: `exp(-V(mu - x))`.
#[derive(Debug, Clone)]
pub struct Prior {
    pub potential: MarginalPotential,
    pub mode: f64,
}

/// Observations, nonlinearities and marginal potentials assembled into a
/// system potential. Immutable after construction.
#[derive(Debug, Clone)]
pub struct ObservationModel {
    y: Vec<f64>,
    nonlinearities: Vec<Arc<Nonlinearity>>,
    potentials: Vec<MarginalPotential>,
    prior: Option<Prior>,
    c_n: f64,
    /// Joint partition: region boundaries collected from all branch
    /// endpoints interior to the support.
    region_cuts: Vec<f64>,
    support: Interval,
}

impl ObservationModel {
    pub fn new(
        y: Vec<f64>,
        nonlinearities: Vec<Arc<Nonlinearity>>,
        potentials: Vec<MarginalPotential>,
        prior: Option<Prior>,
        c_n: f64,
    ) -> Result<Self> {
        let n = y.len();
        if n == 0 {
            return Err(Error::Model("model needs at least one observation".into()));
        }
        if nonlinearities.len() != n || potentials.len() != n {
            return Err(Error::Model(format!(
                "length mismatch: {} observations, {} nonlinearities, {} potentials",
                n,
                nonlinearities.len(),
                potentials.len()
            )));
        }
        let support = nonlinearities
            .iter()
            .map(|nl| nl.support())
            .reduce(|a, b| Interval::new(a.lo.max_ext(b.lo), a.hi.min_ext(b.hi)))
            .unwrap();
        let mut cuts: Vec<f64> = Vec::new();
        for nl in &nonlinearities {
            for b in nl.branches() {
                for end in [b.domain().lo, b.domain().hi] {
                    if let Extended::Finite(v) = end {
                        if support.contains(v)
                            && support.lo != Extended::Finite(v)
                            && support.hi != Extended::Finite(v)
                        {
                            cuts.push(v);
                        }
                    }
                }
            }
        }
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        cuts.dedup_by(|a, b| (*a - *b).abs() <= 1e-12);
        Ok(ObservationModel {
            y,
            nonlinearities,
            potentials,
            prior,
            c_n,
            region_cuts: cuts,
            support,
        })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn observations(&self) -> &[f64] {
        &self.y
    }

    pub fn nonlinearity(&self, i: usize) -> &Nonlinearity {
        &self.nonlinearities[i]
    }

    pub fn potential(&self, i: usize) -> &MarginalPotential {
        &self.potentials[i]
    }

    pub fn prior(&self) -> Option<&Prior> {
        self.prior.as_ref()
    }

    pub fn constant(&self) -> f64 {
        self.c_n
    }

    pub fn support(&self) -> Interval {
        self.support
    }

    /// Replaces the observation vector, keeping nonlinearities, potentials
    /// and prior shared. Used by samplers whose conditioning values change
    /// every step; metadata is not re-verified.
    pub fn with_observations(&self, y: Vec<f64>) -> Result<Self> {
        if y.len() != self.y.len() {
            return Err(Error::Model(format!(
                "observation count changed: {} -> {}",
                self.y.len(),
                y.len()
            )));
        }
        let mut m = self.clone();
        m.y = y;
        Ok(m)
    }

    /// Number of terms in the extended model (observations plus prior).
    pub fn extended_len(&self) -> usize {
        self.len() + usize::from(self.prior.is_some())
    }

    /// Extended observation `y_i`, where index `n` maps to the prior mode.
    pub fn extended_observation(&self, i: usize) -> f64 {
        if i < self.len() {
            self.y[i]
        } else {
            self.prior
                .as_ref()
                .expect("extended index requires a prior")
                .mode
        }
    }

    /// Extended nonlinearity, identity for the prior term.
    pub fn extended_nonlinearity(&self, i: usize) -> Arc<Nonlinearity> {
        if i < self.len() {
            Arc::clone(&self.nonlinearities[i])
        } else {
            debug_assert!(self.prior.is_some());
            static IDENTITY: std::sync::OnceLock<Arc<Nonlinearity>> = std::sync::OnceLock::new();
            Arc::clone(IDENTITY.get_or_init(|| Arc::new(Nonlinearity::identity())))
        }
    }

    /// Extended marginal potential, the prior potential for index `n`.
    pub fn extended_potential(&self, i: usize) -> &MarginalPotential {
        if i < self.len() {
            &self.potentials[i]
        } else {
            &self
                .prior
                .as_ref()
                .expect("extended index requires a prior")
                .potential
        }
    }

    /// The system potential `c_n + sum_i V_i(y_i - g_i(x))`, including the
    /// prior term when one is present.
    pub fn system_potential(&self, x: f64) -> Result<f64> {
        let mut v = self.observation_potential(x)?;
        if let Some(p) = &self.prior {
            v += p.potential.eval(p.mode - x);
        }
        Ok(v)
    }

    /// The observation-only part of the system potential (no prior term).
    pub fn observation_potential(&self, x: f64) -> Result<f64> {
        if !self.support.contains(x) {
            return Err(Error::Domain {
                x,
                support: self.support.to_string(),
            });
        }
        let mut v = self.c_n;
        for i in 0..self.len() {
            v += self.potentials[i].eval(self.y[i] - self.nonlinearities[i].eval(x));
        }
        Ok(v)
    }

    /// `exp(-system_potential)`.
    pub fn likelihood(&self, x: f64) -> Result<f64> {
        Ok((-self.system_potential(x)?).exp())
    }

    /// `exp(-observation_potential)`; the rejection-sampling numerator when
    /// proposals come from the prior.
    pub fn observation_likelihood(&self, x: f64) -> Result<f64> {
        Ok((-self.observation_potential(x)?).exp())
    }

    /// Number of regions in the joint partition.
    pub fn region_count(&self) -> usize {
        self.region_cuts.len() + 1
    }

    /// Region `j` of the joint partition.
    pub fn region(&self, j: usize) -> Result<Interval> {
        if j >= self.region_count() {
            return Err(Error::Parameter(format!(
                "region {j} out of range (model has {} regions)",
                self.region_count()
            )));
        }
        let lo = if j == 0 {
            self.support.lo
        } else {
            Extended::Finite(self.region_cuts[j - 1])
        };
        let hi = if j == self.region_cuts.len() {
            self.support.hi
        } else {
            Extended::Finite(self.region_cuts[j])
        };
        Ok(Interval::new(lo, hi))
    }

    /// Restriction of nonlinearity `i` to region `j`. The region is contained
    /// in a single branch of every nonlinearity by construction of the joint
    /// partition.
    pub fn branch_in_region(&self, i: usize, j: usize) -> Result<&NonlinearBranch> {
        let region = self.region(j)?;
        let probe = match (region.lo, region.hi) {
            (Extended::Finite(l), Extended::Finite(h)) => 0.5 * (l + h),
            (Extended::Finite(l), _) => l + 1.0,
            (_, Extended::Finite(h)) => h - 1.0,
            _ => 0.0,
        };
        Ok(self.nonlinearities[i].branch_at(probe))
    }

    /// The simple estimates of region `j`: the unique root of `g_{i,j}(x) = y_i`
    /// for each observation, or the arg-extremum of the closed region
    /// (possibly a `±inf` sentinel) when `y_i` falls outside the branch range.
    pub fn simple_estimates(&self, j: usize) -> Result<SimpleEstimateSet> {
        let region = self.region(j)?;
        let mut estimates = Vec::with_capacity(self.len());
        for i in 0..self.len() {
            let branch = self.branch_in_region(i, j)?;
            let restricted = restrict_branch(branch, region)?;
            estimates.push(restricted.invert(self.y[i])?);
        }
        Ok(SimpleEstimateSet {
            region: j,
            estimates,
        })
    }
}

/// A copy of `branch` with its domain narrowed to `region`.
fn restrict_branch(branch: &NonlinearBranch, region: Interval) -> Result<NonlinearBranch> {
    let lo = branch.domain().lo.max_ext(region.lo);
    let hi = branch.domain().hi.min_ext(region.hi);
    let mut b = branch.clone();
    b.domain = Interval::new(lo, hi);
    Ok(b)
}
